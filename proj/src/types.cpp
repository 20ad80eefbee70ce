#include "protomem/types.hpp"

#include "protomem/error.hpp"

namespace protomem {

const std::string& part_label_name(PartLabel label) {
  static const std::string names[kNumPartLabels] = {"torso", "head", "hand",
                                                    "foot", "limb"};
  return names[static_cast<int>(label)];
}

PartLabel part_label_from_name(const std::string& name) {
  for (int i = 0; i < kNumPartLabels; ++i) {
    if (part_label_name(static_cast<PartLabel>(i)) == name) {
      return static_cast<PartLabel>(i);
    }
  }
  throw Error(ErrorKind::InvalidInput, "unknown part label: " + name);
}

}  // namespace protomem
