// Command-line toolchain: synthetic model/corpus generation, clustering,
// prototype memory construction, labeling, prototype selection, fitting
// experiments, metric reports and distance bucketing.

#include <omp.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "protomem/body_model.hpp"
#include "protomem/clustering.hpp"
#include "protomem/dataset.hpp"
#include "protomem/distance.hpp"
#include "protomem/error.hpp"
#include "protomem/fitting.hpp"
#include "protomem/metrics.hpp"
#include "protomem/prototype_memory.hpp"

namespace {

using namespace protomem;

constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitValidation = 3;
constexpr int kExitNumerical = 4;

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::Io:
      return kExitIo;
    case ErrorKind::InvalidInput:
    case ErrorKind::DegenerateInput:
    case ErrorKind::LoadError:
      return kExitValidation;
    case ErrorKind::AmbiguousAverage:
    case ErrorKind::CenterUpdate:
    case ErrorKind::DegenerateSelection:
    case ErrorKind::FitDiverged:
    case ErrorKind::Alignment:
      return kExitNumerical;
  }
  return kExitNumerical;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write: " + path);
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path);
}

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> values;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    values.push_back(std::stod(item));
  }
  return values;
}

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> values;
  for (double v : parse_double_list(csv)) values.push_back(static_cast<int>(v));
  return values;
}

struct ClusterFlags {
  std::string model_path;
  std::string data_path;
  std::string variant = "p3dh";
  int k = 50;
  double gamma_hat = 0.0;
  int lambda_hat = 100;
  std::uint64_t seed = 0;
  double w_torso = 1.0, w_head = 0.3, w_hand = 0.3, w_foot = 0.5, w_limb = 5.0;

  ClusterConfig to_config() const {
    ClusterConfig config;
    config.k = k;
    config.gamma_hat = gamma_hat;
    config.lambda_hat = lambda_hat;
    config.seed = seed;
    config.variant = variant_from_name(variant);
    config.part_weight_map =
        PartWeightMap{w_torso, w_head, w_hand, w_foot, w_limb};
    return config;
  }
};

void add_part_weight_flags(CLI::App* cmd, ClusterFlags& flags) {
  cmd->add_option("--w-torso", flags.w_torso, "torso vertex weight");
  cmd->add_option("--w-head", flags.w_head, "head vertex weight");
  cmd->add_option("--w-hand", flags.w_hand, "hand vertex weight");
  cmd->add_option("--w-foot", flags.w_foot, "foot vertex weight");
  cmd->add_option("--w-limb", flags.w_limb, "limb (arm/leg) vertex weight");
}

// Fit problems built from dataset records: 3D joint targets always, and
// 2D keypoint targets when the record carries them.
FitProblem problem_from_record(const DatasetRecord& record,
                               const BodyModel& model) {
  FitProblem problem;
  if (record.target_j3d) {
    problem.target_j3d = *record.target_j3d;
  } else {
    const ForwardResult fwd = forward(model, record.params);
    problem.target_j3d = regress_joints(model, fwd.vertices);
  }
  if (record.target_j2d) problem.target_j2d = *record.target_j2d;
  if (record.visibility) problem.visibility = *record.visibility;
  return problem;
}

struct FitOutcome {
  double final_loss = 0.0;
  double mpvpe_mm = 0.0;
  BodyParams params;
};

// Fits every record's problem from the given initialization and scores the
// result against the record's true parameters. Parallel across problems;
// each slot is written once, so results are thread-count independent.
std::vector<FitOutcome> fit_batch(const std::vector<DatasetRecord>& records,
                                  const std::vector<BodyParams>& inits,
                                  const BodyModel& model, int iters,
                                  double step) {
  const std::int64_t n = static_cast<std::int64_t>(records.size());
  std::vector<FitOutcome> outcomes(n);
  std::vector<std::string> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      const FitProblem problem = problem_from_record(records[i], model);
      const FitReport report =
          fit(inits[i], CameraParams{}, model, problem, iters, step);
      FitOutcome outcome;
      outcome.final_loss = report.trace.empty() ? 0.0 : report.trace.back();
      outcome.params = report.params;
      const MeshVertices pred = forward(model, report.params).vertices;
      const MeshVertices truth = forward(model, records[i].params).vertices;
      outcome.mpvpe_mm = mpvpe(pred, truth);
      outcomes[i] = std::move(outcome);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (std::int64_t i = 0; i < n; ++i) {
    if (!errors[i].empty()) {
      throw Error(ErrorKind::FitDiverged,
                  "problem " + std::to_string(i) + ": " + errors[i]);
    }
  }
  return outcomes;
}

std::vector<BodyParams> nearest_prototype_inits(
    const std::vector<BodyParams>& samples, const PrototypeMemory& memory,
    const BodyModel& model, const PartWeights& w) {
  const auto labels = label_samples(samples, memory, model, w);
  std::vector<BodyParams> inits;
  inits.reserve(samples.size());
  for (const ScoreVector& c : labels) inits.push_back(select_prototype(memory, c));
  return inits;
}

double mean_of(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

// ---------------------------------------------------------------------------
// Subcommand bodies

int cmd_gen_toy(std::uint64_t seed, int verts_per_joint,
                const std::string& out) {
  const BodyModel model = gen_toy_model(seed, verts_per_joint);
  save_model(model, out);
  std::cout << "wrote toy model with " << model.vertex_count()
            << " vertices to " << out << "\n";
  return 0;
}

int cmd_gen_samples(const std::string& model_path, std::uint64_t seed, int n,
                    int clusters, double noise, bool with_targets,
                    const std::string& out, std::string labels_out) {
  const BodyModel model = load_model(model_path);
  SampleGenConfig config;
  config.seed = seed;
  config.n = n;
  config.clusters = clusters;
  config.noise = noise;
  config.with_targets = with_targets;
  const SyntheticCorpus corpus = gen_samples(config, model);
  save_records(corpus.records, out);
  if (labels_out.empty()) labels_out = out + ".labels.json";
  save_labels(corpus.labels, labels_out);
  std::cout << "wrote " << n << " samples (" << clusters << " clusters) to "
            << out << "\n";
  return 0;
}

int cmd_cluster(const ClusterFlags& flags, const std::string& out) {
  const BodyModel model = load_model(flags.model_path);
  const auto records = load_records(flags.data_path);
  const auto samples = records_to_params(records);
  const ClusterConfig config = flags.to_config();
  const ClusterResult result = run_clustering(samples, config, model);
  for (size_t i = 0; i < result.trace.size(); ++i) {
    std::cout << "iteration " << i << ": average distance " << result.trace[i]
              << "\n";
  }
  nlohmann::json j = cluster_result_to_json(result);
  j["config"]["data_digest"] = file_digest(flags.data_path);
  write_text(out, j.dump() + "\n");
  std::cout << "wrote cluster result (" << result.centers.size()
            << " centers) to " << out << "\n";
  return 0;
}

int cmd_build_memory(const std::string& result_path, const std::string& out) {
  std::ifstream in(result_path);
  if (!in) throw Error(ErrorKind::Io, "cannot open cluster result: " + result_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::LoadError, std::string("cluster result parse: ") +
                                          e.what());
  }
  const ClusterResult result = cluster_result_from_json(j);
  std::string digest;
  if (j.contains("config") && j["config"].contains("data_digest")) {
    digest = j["config"]["data_digest"].get<std::string>();
  }
  const PrototypeMemory memory = build_memory(result, digest);
  save_memory(memory, out);
  std::cout << "wrote memory with K=" << memory.k() << " to " << out << "\n";
  return 0;
}

int cmd_label(const std::string& model_path, const std::string& memory_path,
              const std::string& data_path, const ClusterFlags& flags,
              const std::string& out) {
  const BodyModel model = load_model(model_path);
  const PrototypeMemory memory = load_memory(memory_path);
  const auto samples = records_to_params(load_records(data_path));
  const PartWeights w = build_part_weights(
      model, PartWeightMap{flags.w_torso, flags.w_head, flags.w_hand,
                           flags.w_foot, flags.w_limb});
  const auto labels = label_samples(samples, memory, model, w);
  save_scores(labels, out);
  std::cout << "wrote " << labels.size() << " labels to " << out << "\n";
  return 0;
}

int cmd_select(const std::string& memory_path, const std::string& scores_path,
               const std::string& out) {
  const PrototypeMemory memory = load_memory(memory_path);
  const auto scores = load_scores(scores_path);
  std::vector<DatasetRecord> records;
  records.reserve(scores.size());
  for (const ScoreVector& c : scores) {
    DatasetRecord record;
    record.params = select_prototype(memory, c);
    records.push_back(std::move(record));
  }
  save_records(records, out);
  std::cout << "wrote " << records.size() << " selected prototypes to " << out
            << "\n";
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& pred_path,
             const std::string& gt_path, const std::string& out) {
  const BodyModel model = load_model(model_path);
  const auto pred = records_to_params(load_records(pred_path));
  const auto gt = records_to_params(load_records(gt_path));
  if (pred.size() != gt.size() || pred.empty()) {
    throw Error(ErrorKind::InvalidInput,
                "eval: pred and gt must have the same nonzero size");
  }
  const std::int64_t n = static_cast<std::int64_t>(pred.size());
  std::vector<PerSampleMetrics> per_sample(n);
  std::vector<std::string> errors(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      const MeshVertices pv = forward(model, pred[i]).vertices;
      const MeshVertices gv = forward(model, gt[i]).vertices;
      per_sample[i] = compute_sample_metrics(pv, gv, regress_joints(model, pv),
                                             regress_joints(model, gv));
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (std::int64_t i = 0; i < n; ++i) {
    if (!errors[i].empty()) {
      throw Error(ErrorKind::InvalidInput,
                  "eval sample " + std::to_string(i) + ": " + errors[i]);
    }
  }
  const MetricReport report = aggregate_metrics(per_sample);
  nlohmann::json j = metric_report_to_json(report);
  auto& rows = j["per_sample"] = nlohmann::json::array();
  for (const PerSampleMetrics& m : per_sample) {
    rows.push_back({{"mpvpe", m.mpvpe},
                    {"mpjpe", m.mpjpe},
                    {"pa_mpjpe", m.pa_mpjpe}});
  }
  if (!out.empty()) write_text(out, j.dump() + "\n");
  std::printf("MPVPE %.4f mm, MPJPE %.4f mm, PA-MPJPE %.4f mm over %d samples\n",
              report.mpvpe, report.mpjpe, report.pa_mpjpe, report.count);
  return 0;
}

int cmd_buckets(const std::string& model_path, const std::string& data_path,
                const std::string& singular_path, const std::string& edges_csv,
                const std::string& tails_csv, const std::string& pred_path,
                const std::string& out, const std::string& csv_out) {
  const BodyModel model = load_model(model_path);
  const auto samples = records_to_params(load_records(data_path));
  const PrototypeMemory singular_memory = load_memory(singular_path);
  if (singular_memory.k() != 1) {
    throw Error(ErrorKind::InvalidInput,
                "buckets: singular memory must have K=1, got K=" +
                    std::to_string(singular_memory.k()));
  }
  const BodyParams singular = singular_memory.prototype(0);
  const std::vector<double> edges = parse_double_list(edges_csv);
  const std::vector<double> tails = parse_double_list(tails_csv);

  std::optional<std::vector<PerSampleMetrics>> per_sample;
  if (!pred_path.empty()) {
    const auto pred = records_to_params(load_records(pred_path));
    if (pred.size() != samples.size()) {
      throw Error(ErrorKind::InvalidInput,
                  "buckets: pred count must match sample count");
    }
    per_sample.emplace(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
      const MeshVertices pv = forward(model, pred[i]).vertices;
      const MeshVertices gv = forward(model, samples[i]).vertices;
      (*per_sample)[i] = compute_sample_metrics(
          pv, gv, regress_joints(model, pv), regress_joints(model, gv));
    }
  }

  const BucketReport report = bucket_by_prototype_distance(
      samples, singular, model, edges, tails,
      per_sample ? &*per_sample : nullptr);
  write_text(out, bucket_report_to_json(report).dump() + "\n");
  if (!csv_out.empty()) write_text(csv_out, bucket_report_to_csv(report));
  for (const Bucket& b : report.buckets) {
    std::cout << "bucket [" << b.lo << ", " << b.hi << "): " << b.count
              << " samples\n";
  }
  return 0;
}

struct FitFlags {
  std::string model_path;
  std::string data_path;
  std::string problems_path;
  std::string memory_path;
  std::string baseline_memory_path;
  std::string scores_path;
  bool paired = false;
  int iters = 10;
  double step = 1e-3;
  std::string sweep_k;
  std::string sweep_limb_weight;
  std::uint64_t seed = 0;
  int k = 50;
  std::string out;
  std::string csv_out;
};

// Paired experiment: every record fitted twice at the same budget, once
// from its nearest prototype and once from the K=1 baseline row.
int run_paired_fit(const FitFlags& flags) {
  const BodyModel model = load_model(flags.model_path);
  const auto records = load_records(flags.data_path);
  const auto samples = records_to_params(records);
  const PrototypeMemory memory = load_memory(flags.memory_path);
  const PrototypeMemory baseline = load_memory(flags.baseline_memory_path);
  if (baseline.k() != 1) {
    throw Error(ErrorKind::InvalidInput,
                "fit --paired: baseline memory must have K=1");
  }
  const PartWeights w = build_part_weights(model, PartWeightMap{});

  const auto proto_inits = nearest_prototype_inits(samples, memory, model, w);
  const BodyParams global_mean = baseline.prototype(0);
  const std::vector<BodyParams> global_inits(samples.size(), global_mean);

  const auto proto_runs = fit_batch(records, proto_inits, model, flags.iters,
                                    flags.step);
  const auto global_runs = fit_batch(records, global_inits, model, flags.iters,
                                     flags.step);

  // Tail ranking by distance to the baseline prototype.
  const MeshVertices global_verts = forward(model, global_mean).vertices;
  std::vector<double> rmsd(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    rmsd[i] = unweighted_vertex_rmsd(forward(model, samples[i]).vertices,
                                     global_verts);
  }
  std::vector<int> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (rmsd[a] != rmsd[b]) return rmsd[a] > rmsd[b];
    return a < b;
  });

  int wins = 0;
  std::vector<double> proto_err, global_err;
  for (size_t i = 0; i < samples.size(); ++i) {
    proto_err.push_back(proto_runs[i].mpvpe_mm);
    global_err.push_back(global_runs[i].mpvpe_mm);
    if (proto_runs[i].mpvpe_mm <= global_runs[i].mpvpe_mm) ++wins;
  }

  nlohmann::json j;
  j["n"] = samples.size();
  j["iters"] = flags.iters;
  j["wins"] = wins;
  j["win_rate"] = static_cast<double>(wins) / static_cast<double>(samples.size());
  j["overall"] = {{"proto_mpvpe", mean_of(proto_err)},
                  {"global_mpvpe", mean_of(global_err)}};
  auto& tails = j["tails"] = nlohmann::json::array();
  std::ostringstream table;
  table << "subset,n,proto_mpvpe,global_mpvpe,win_rate\n";
  table << "all," << samples.size() << "," << mean_of(proto_err) << ","
        << mean_of(global_err) << "," << j["win_rate"].get<double>() << "\n";
  for (double percent : {5.0, 10.0, 20.0}) {
    const auto count = static_cast<size_t>(std::llround(
        percent / 100.0 * static_cast<double>(samples.size())));
    if (count == 0) continue;
    std::vector<double> pe, ge;
    int tail_wins = 0;
    for (size_t r = 0; r < count; ++r) {
      const int idx = order[r];
      pe.push_back(proto_runs[idx].mpvpe_mm);
      ge.push_back(global_runs[idx].mpvpe_mm);
      if (proto_runs[idx].mpvpe_mm <= global_runs[idx].mpvpe_mm) ++tail_wins;
    }
    nlohmann::json tail;
    tail["percent"] = percent;
    tail["n"] = count;
    tail["proto_mpvpe"] = mean_of(pe);
    tail["global_mpvpe"] = mean_of(ge);
    tail["win_rate"] = static_cast<double>(tail_wins) / count;
    tails.push_back(tail);
    table << "tail-" << percent << "%," << count << "," << mean_of(pe) << ","
          << mean_of(ge) << "," << (static_cast<double>(tail_wins) / count)
          << "\n";
  }
  auto& per_problem = j["per_problem"] = nlohmann::json::array();
  for (size_t i = 0; i < samples.size(); ++i) {
    per_problem.push_back({{"rmsd", rmsd[i]},
                           {"proto_mpvpe", proto_runs[i].mpvpe_mm},
                           {"global_mpvpe", global_runs[i].mpvpe_mm}});
  }
  write_text(flags.out, j.dump() + "\n");
  if (!flags.csv_out.empty()) write_text(flags.csv_out, table.str());
  std::cout << table.str();
  return 0;
}

// Sweep driver: cluster at each configuration, fit every sample from its
// selected prototype, report overall and tail errors against the corpus's
// own singular prototype.
int run_sweep(const FitFlags& flags, bool sweep_k) {
  const BodyModel model = load_model(flags.model_path);
  const auto records = load_records(flags.data_path);
  const auto samples = records_to_params(records);

  ClusterConfig base;
  base.seed = flags.seed;
  base.lambda_hat = 30;

  // Singular prototype for tail ranking, built once from the corpus.
  ClusterConfig single = base;
  single.k = 1;
  const ClusterResult single_result = p3dh_kmeans(samples, single, model);
  const BodyParams singular = single_result.centers[0];
  const MeshVertices singular_verts = forward(model, singular).vertices;
  std::vector<double> rmsd(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    rmsd[i] = unweighted_vertex_rmsd(forward(model, samples[i]).vertices,
                                     singular_verts);
  }
  std::vector<int> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (rmsd[a] != rmsd[b]) return rmsd[a] > rmsd[b];
    return a < b;
  });
  auto tail_mean = [&](const std::vector<FitOutcome>& runs, double percent) {
    const auto count = static_cast<size_t>(std::llround(
        percent / 100.0 * static_cast<double>(samples.size())));
    std::vector<double> errs;
    for (size_t r = 0; r < std::min(count, order.size()); ++r) {
      errs.push_back(runs[order[r]].mpvpe_mm);
    }
    return mean_of(errs);
  };

  const std::vector<double> values =
      sweep_k ? [&] {
        std::vector<double> v;
        for (int k : parse_int_list(flags.sweep_k)) v.push_back(k);
        return v;
      }()
              : parse_double_list(flags.sweep_limb_weight);
  if (values.empty()) {
    throw Error(ErrorKind::InvalidInput, "sweep: no configuration values");
  }

  nlohmann::json rows = nlohmann::json::array();
  std::ostringstream table;
  table << (sweep_k ? "k" : "limb_weight")
        << ",mpvpe,tail5_mpvpe,tail10_mpvpe\n";
  for (double value : values) {
    ClusterConfig config = base;
    if (sweep_k) {
      config.k = static_cast<int>(value);
    } else {
      config.k = flags.k;
      config.part_weight_map.limb = value;
    }
    const ClusterResult result = p3dh_kmeans(samples, config, model);
    const PrototypeMemory memory = build_memory(result);
    const PartWeights w = build_part_weights(model, config.part_weight_map);
    const auto inits = nearest_prototype_inits(samples, memory, model, w);
    const auto runs = fit_batch(records, inits, model, flags.iters, flags.step);
    std::vector<double> errs;
    for (const FitOutcome& r : runs) errs.push_back(r.mpvpe_mm);
    nlohmann::json row;
    row[sweep_k ? "k" : "limb_weight"] = value;
    row["mpvpe"] = mean_of(errs);
    row["tail5_mpvpe"] = tail_mean(runs, 5.0);
    row["tail10_mpvpe"] = tail_mean(runs, 10.0);
    rows.push_back(row);
    table << value << "," << mean_of(errs) << "," << tail_mean(runs, 5.0)
          << "," << tail_mean(runs, 10.0) << "\n";
  }
  nlohmann::json j;
  j[sweep_k ? "sweep_k" : "sweep_limb_weight"] = rows;
  write_text(flags.out, j.dump() + "\n");
  if (!flags.csv_out.empty()) write_text(flags.csv_out, table.str());
  std::cout << table.str();
  return 0;
}

int run_plain_fit(const FitFlags& flags) {
  const BodyModel model = load_model(flags.model_path);

  std::vector<FitProblem> problems;
  std::vector<BodyParams> inits;
  std::vector<const BodyParams*> truths;
  std::vector<DatasetRecord> records;

  if (!flags.data_path.empty()) {
    records = load_records(flags.data_path);
    for (const DatasetRecord& r : records) {
      problems.push_back(problem_from_record(r, model));
    }
  } else if (!flags.problems_path.empty()) {
    problems = load_problems(flags.problems_path);
  } else {
    throw Error(ErrorKind::InvalidInput, "fit: need --data or --problems");
  }

  if (!flags.memory_path.empty()) {
    const PrototypeMemory memory = load_memory(flags.memory_path);
    if (!flags.scores_path.empty()) {
      const auto scores = load_scores(flags.scores_path);
      if (scores.size() != problems.size()) {
        throw Error(ErrorKind::InvalidInput,
                    "fit: score count must match problem count");
      }
      for (const ScoreVector& c : scores) {
        inits.push_back(select_prototype(memory, c));
      }
    } else if (!records.empty()) {
      const PartWeights w = build_part_weights(model, PartWeightMap{});
      inits = nearest_prototype_inits(records_to_params(records), memory,
                                      model, w);
    } else {
      throw Error(ErrorKind::InvalidInput,
                  "fit: --memory needs --scores or --data to pick prototypes");
    }
  } else {
    inits.assign(problems.size(), BodyParams::identity());
  }

  nlohmann::json out_rows = nlohmann::json::array();
  for (size_t i = 0; i < problems.size(); ++i) {
    const FitReport report =
        fit(inits[i], CameraParams{}, model, problems[i], flags.iters,
            flags.step);
    nlohmann::json row;
    row["final_loss"] = report.trace.back();
    row["iterations"] = report.iterations;
    row["trace"] = report.trace;
    nlohmann::json pose = nlohmann::json::array();
    const ParamVec flat = report.params.flatten();
    for (int d = 0; d < kParamDim; ++d) pose.push_back(flat(d));
    row["params"] = std::move(pose);
    row["camera"] = {{"s", report.cam.s},
                     {"tx", report.cam.t.x()},
                     {"ty", report.cam.t.y()}};
    if (!records.empty()) {
      const MeshVertices pred = forward(model, report.params).vertices;
      const MeshVertices truth = forward(model, records[i].params).vertices;
      row["mpvpe"] = mpvpe(pred, truth);
    }
    out_rows.push_back(std::move(row));
  }
  nlohmann::json j;
  j["fits"] = out_rows;
  write_text(flags.out, j.dump() + "\n");
  std::cout << "fitted " << problems.size() << " problems, report in "
            << flags.out << "\n";
  return 0;
}

int cmd_fit(const FitFlags& flags) {
  if (!flags.sweep_k.empty()) return run_sweep(flags, true);
  if (!flags.sweep_limb_weight.empty()) return run_sweep(flags, false);
  if (flags.paired) {
    if (flags.data_path.empty() || flags.memory_path.empty() ||
        flags.baseline_memory_path.empty()) {
      throw Error(ErrorKind::InvalidInput,
                  "fit --paired needs --data, --memory and --baseline-memory");
    }
    return run_paired_fit(flags);
  }
  return run_plain_fit(flags);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prototype-memory toolchain for articulated body models"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads,
                 "worker thread count (0 = library default); never changes "
                 "numerical results");

  // gen-toy
  auto* gen_toy = app.add_subcommand("gen-toy", "write a synthetic toy model");
  std::uint64_t toy_seed = 0;
  int verts_per_joint = 10;
  std::string toy_out;
  gen_toy->add_option("--seed", toy_seed, "generator seed");
  gen_toy->add_option("--verts-per-joint", verts_per_joint,
                      "ring vertices per joint (>= 3)");
  gen_toy->add_option("--out", toy_out, "output model JSON")->required();

  // gen-samples
  auto* gen_samples_cmd =
      app.add_subcommand("gen-samples", "write a synthetic sample corpus");
  std::string gs_model, gs_out, gs_labels_out;
  std::uint64_t gs_seed = 0;
  int gs_n = 100, gs_clusters = 1;
  double gs_noise = 0.05;
  bool gs_targets = false;
  gen_samples_cmd->add_option("--model", gs_model, "body model JSON")->required();
  gen_samples_cmd->add_option("--seed", gs_seed, "generator seed");
  gen_samples_cmd->add_option("--n", gs_n, "sample count");
  gen_samples_cmd->add_option("--clusters", gs_clusters, "generator count");
  gen_samples_cmd->add_option("--noise", gs_noise, "member noise (radians)");
  gen_samples_cmd->add_flag("--with-targets", gs_targets,
                            "attach 3D/2D fitting targets");
  gen_samples_cmd->add_option("--out", gs_out, "output JSON Lines")->required();
  gen_samples_cmd->add_option("--labels-out", gs_labels_out,
                              "label sidecar path (default <out>.labels.json)");

  // cluster
  auto* cluster_cmd = app.add_subcommand("cluster", "run a clustering variant");
  ClusterFlags cf;
  std::string cluster_out;
  cluster_cmd->add_option("--model", cf.model_path, "body model JSON")->required();
  cluster_cmd->add_option("--data", cf.data_path, "sample JSON Lines")->required();
  cluster_cmd->add_option("--variant", cf.variant,
                          "p3dh | 3dh | random_center | naive");
  cluster_cmd->add_option("--k", cf.k, "cluster count");
  cluster_cmd->add_option("--gamma-hat", cf.gamma_hat,
                          "average-distance stop threshold");
  cluster_cmd->add_option("--lambda-hat", cf.lambda_hat, "iteration budget");
  cluster_cmd->add_option("--seed", cf.seed, "init seed");
  add_part_weight_flags(cluster_cmd, cf);
  cluster_cmd->add_option("--out", cluster_out, "output result JSON")->required();

  // build-memory
  auto* build_cmd = app.add_subcommand("build-memory",
                                       "persist cluster centers as a memory");
  std::string bm_result, bm_out;
  build_cmd->add_option("--result", bm_result, "cluster result JSON")->required();
  build_cmd->add_option("--out", bm_out, "output memory JSON")->required();

  // label
  auto* label_cmd =
      app.add_subcommand("label", "one-hot nearest-prototype labels");
  std::string lb_model, lb_memory, lb_data, lb_out;
  ClusterFlags lb_weights;
  label_cmd->add_option("--model", lb_model, "body model JSON")->required();
  label_cmd->add_option("--memory", lb_memory, "memory JSON")->required();
  label_cmd->add_option("--data", lb_data, "sample JSON Lines")->required();
  add_part_weight_flags(label_cmd, lb_weights);
  label_cmd->add_option("--out", lb_out, "output score JSON Lines")->required();

  // select
  auto* select_cmd =
      app.add_subcommand("select", "decode prototypes for score vectors");
  std::string sel_memory, sel_scores, sel_out;
  select_cmd->add_option("--memory", sel_memory, "memory JSON")->required();
  select_cmd->add_option("--scores", sel_scores, "score JSON Lines")->required();
  select_cmd->add_option("--out", sel_out, "output parameter JSON Lines")
      ->required();

  // fit
  auto* fit_cmd = app.add_subcommand(
      "fit", "iterative fitting, paired experiments and sweeps");
  FitFlags ff;
  fit_cmd->add_option("--model", ff.model_path, "body model JSON")->required();
  fit_cmd->add_option("--data", ff.data_path,
                      "sample JSON Lines (targets + ground truth)");
  fit_cmd->add_option("--problems", ff.problems_path, "problem JSON Lines");
  fit_cmd->add_option("--memory", ff.memory_path, "memory JSON for inits");
  fit_cmd->add_option("--baseline-memory", ff.baseline_memory_path,
                      "K=1 memory for paired runs");
  fit_cmd->add_option("--scores", ff.scores_path, "score JSON Lines for inits");
  fit_cmd->add_flag("--paired", ff.paired,
                    "fit from prototype and from the K=1 baseline");
  fit_cmd->add_option("--iters", ff.iters, "descent iterations");
  fit_cmd->add_option("--step", ff.step, "descent step size");
  fit_cmd->add_option("--sweep-k", ff.sweep_k,
                      "comma list of K values to sweep");
  fit_cmd->add_option("--sweep-limb-weight", ff.sweep_limb_weight,
                      "comma list of limb weights to sweep");
  fit_cmd->add_option("--seed", ff.seed, "clustering seed for sweeps");
  fit_cmd->add_option("--k", ff.k, "cluster count for the limb-weight sweep");
  fit_cmd->add_option("--out", ff.out, "output report JSON")->required();
  fit_cmd->add_option("--csv", ff.csv_out, "optional CSV table");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "metric report for predictions");
  std::string ev_model, ev_pred, ev_gt, ev_out;
  eval_cmd->add_option("--model", ev_model, "body model JSON")->required();
  eval_cmd->add_option("--pred", ev_pred, "predicted parameter JSON Lines")
      ->required();
  eval_cmd->add_option("--gt", ev_gt, "ground-truth parameter JSON Lines")
      ->required();
  eval_cmd->add_option("--out", ev_out, "output report JSON");

  // buckets
  auto* buckets_cmd = app.add_subcommand(
      "buckets", "bucket samples by distance to a singular prototype");
  std::string bk_model, bk_data, bk_singular, bk_edges, bk_tails = "5,10";
  std::string bk_pred, bk_out, bk_csv;
  buckets_cmd->add_option("--model", bk_model, "body model JSON")->required();
  buckets_cmd->add_option("--data", bk_data, "sample JSON Lines")->required();
  buckets_cmd->add_option("--singular", bk_singular, "K=1 memory JSON")
      ->required();
  buckets_cmd->add_option("--edges", bk_edges, "comma list of bucket edges")
      ->required();
  buckets_cmd->add_option("--tails", bk_tails, "comma list of tail percents");
  buckets_cmd->add_option("--pred", bk_pred,
                          "optional predictions for per-bucket metrics");
  buckets_cmd->add_option("--out", bk_out, "output report JSON")->required();
  buckets_cmd->add_option("--csv", bk_csv, "optional CSV table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  }

  if (threads > 0) omp_set_num_threads(threads);

  try {
    if (*gen_toy) return cmd_gen_toy(toy_seed, verts_per_joint, toy_out);
    if (*gen_samples_cmd) {
      return cmd_gen_samples(gs_model, gs_seed, gs_n, gs_clusters, gs_noise,
                             gs_targets, gs_out, gs_labels_out);
    }
    if (*cluster_cmd) return cmd_cluster(cf, cluster_out);
    if (*build_cmd) return cmd_build_memory(bm_result, bm_out);
    if (*label_cmd) return cmd_label(lb_model, lb_memory, lb_data, lb_weights, lb_out);
    if (*select_cmd) return cmd_select(sel_memory, sel_scores, sel_out);
    if (*fit_cmd) return cmd_fit(ff);
    if (*eval_cmd) return cmd_eval(ev_model, ev_pred, ev_gt, ev_out);
    if (*buckets_cmd) {
      return cmd_buckets(bk_model, bk_data, bk_singular, bk_edges, bk_tails,
                         bk_pred, bk_out, bk_csv);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return 0;
}
