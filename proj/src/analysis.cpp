#include "debias/analysis.hpp"

#include <sstream>

#include "debias/data.hpp"
#include "debias/errors.hpp"
#include "debias/random.hpp"

namespace debias {

PenalizationTable penalization_table(std::span<const double> success_probs,
                                     std::span<const double> demog_probs,
                                     std::span<const int> main_correct) {
  if (success_probs.size() != demog_probs.size() || success_probs.size() != main_correct.size()) {
    throw ConfigError("penalization_table: input lengths differ");
  }
  PenalizationTable t;
  for (std::size_t i = 0; i < main_correct.size(); ++i) {
    PenalizationRow& row = main_correct[i] ? t.main_correct : t.main_wrong;
    const bool by_success = success_probs[i] > 0.5;
    const bool by_demog = demog_probs[i] > 0.5;
    ++row.population;
    if (by_success) ++row.penalized[0];
    if (by_demog && !by_success) ++row.penalized[1];
    if (by_demog && by_success) ++row.penalized[2];
  }
  for (PenalizationRow* row : {&t.main_correct, &t.main_wrong}) {
    if (row->population == 0) continue;
    for (std::size_t c = 0; c < 3; ++c) {
      row->percent[c] = 100.0 * static_cast<double>(row->penalized[c]) /
                        static_cast<double>(row->population);
    }
  }
  return t;
}

std::string to_csv(const PenalizationTable& table) {
  std::ostringstream out;
  out << "population,count,success_pct,demog_only_pct,both_pct\n";
  const auto emit = [&](const char* name, const PenalizationRow& row) {
    out << name << ',' << row.population;
    for (const auto& p : row.percent) out << ',' << (p ? format_double(*p) : "undefined");
    out << '\n';
  };
  emit("main_correct", table.main_correct);
  emit("main_wrong", table.main_wrong);
  return out.str();
}

LinearModel train_posthoc_detector(const MlpParams& params, const Dataset& ds,
                                   const LinearTrainOptions& options) {
  if (!ds.has_groups()) throw ConfigError("post-hoc demographics detector needs z");
  LinearTrainOptions own = options;
  own.seed = derive_seed(options.seed, stream::kPosthocDetector);
  return train_linear(extract_representations(params, ds), *ds.groups, ds.num_groups, own);
}

std::vector<double> posthoc_target_probs(const LinearModel& detector, const MlpParams& params,
                                         const Dataset& ds) {
  if (!ds.has_groups()) throw ConfigError("post-hoc demographics detector needs z");
  const Matrix p = predict_proba(detector, extract_representations(params, ds));
  std::vector<double> out(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) out[i] = p(i, static_cast<std::size_t>(ds.group(i)));
  return out;
}

}  // namespace debias
