#ifndef VIBREC_CHECKPOINT_HPP_
#define VIBREC_CHECKPOINT_HPP_

#include <filesystem>
#include <variant>

#include "vibrec/baselines.hpp"
#include "vibrec/vibdml.hpp"

namespace vibrec {

using AnyModel = std::variant<VibDmlModel, DotProductModel, MetricFModel>;

ModelKind checkpoint_kind(const AnyModel& model);

// Versioned binary container (magic "VIBRECK1", kind tag, config, tables).
// Doubles are stored raw, so a save/load/save cycle is byte-identical and
// evaluation after reload is bit-exact.
void save_checkpoint(const AnyModel& model, const std::filesystem::path& path);
AnyModel load_checkpoint(const std::filesystem::path& path);

}  // namespace vibrec

#endif  // VIBREC_CHECKPOINT_HPP_
