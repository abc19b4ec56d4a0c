#ifndef STP_TRIAL_HPP
#define STP_TRIAL_HPP

#include <nlohmann/json_fwd.hpp>

#include "stp/kernel.hpp"
#include "stp/scene.hpp"

namespace stp {

/// One study trial: technique pair plus target placement.
struct TrialSpec {
  SwitchMethod switch_method = SwitchMethod::Button;
  OrientationMethod orientation_method = OrientationMethod::Roll;
  double depth = 3.0;
  double rotation = 45.0;
  int repetition = 1;

  TrialSceneSpec scene_spec() const;
  /// `base` with the trial's technique pair applied.
  KernelConfig kernel_config(KernelConfig base = {}) const;

  friend bool operator==(const TrialSpec&, const TrialSpec&) = default;
};

nlohmann::json trial_to_json(const TrialSpec& t);
TrialSpec trial_from_json(const nlohmann::json& j);

}  // namespace stp

#endif  // STP_TRIAL_HPP
