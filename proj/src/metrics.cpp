#include "advstance/metrics.hpp"

#include "advstance/errors.hpp"

namespace advstance {

FavgClasses parse_favg_classes(std::string_view text) {
  if (text == "2" || text == "stance_bearing") return FavgClasses::stance_bearing;
  if (text == "3" || text == "all") return FavgClasses::all;
  throw ConfigError("invalid F_avg class set '" + std::string(text) + "' (allowed: 2, 3)");
}

namespace {

void check_lengths(std::span<const Stance> predictions, std::span<const Stance> golds) {
  if (predictions.size() != golds.size()) {
    throw ShapeError("metrics: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(golds.size()) + " gold labels");
  }
}

}  // namespace

std::array<double, kNumStances> f1_per_class(std::span<const Stance> predictions, std::span<const Stance> golds) {
  check_lengths(predictions, golds);
  std::array<double, kNumStances> tp{}, pred_count{}, gold_count{};
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const auto p = static_cast<std::size_t>(predictions[i]);
    const auto g = static_cast<std::size_t>(golds[i]);
    pred_count[p] += 1;
    gold_count[g] += 1;
    if (p == g) tp[g] += 1;
  }
  std::array<double, kNumStances> f1{};
  for (std::size_t c = 0; c < f1.size(); ++c) {
    // 2PR/(P+R) simplifies to 2TP/(#pred + #gold).
    const double denom = pred_count[c] + gold_count[c];
    f1[c] = (tp[c] > 0 && denom > 0) ? 2.0 * tp[c] / denom : 0.0;
  }
  return f1;
}

double f_avg(std::span<const Stance> predictions, std::span<const Stance> golds, FavgClasses classes) {
  const auto f1 = f1_per_class(predictions, golds);
  if (classes == FavgClasses::all) return (f1[0] + f1[1] + f1[2]) / 3.0;
  return (f1[static_cast<int>(Stance::favor)] + f1[static_cast<int>(Stance::against)]) / 2.0;
}

double micro_f1(std::span<const Stance> predictions, std::span<const Stance> golds) {
  check_lengths(predictions, golds);
  if (golds.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) correct += predictions[i] == golds[i];
  return static_cast<double>(correct) / static_cast<double>(golds.size());
}

double macro_f1(std::span<const Stance> predictions, std::span<const Stance> golds) {
  const auto f1 = f1_per_class(predictions, golds);
  return (f1[0] + f1[1] + f1[2]) / 3.0;
}

double f_m(std::span<const Stance> predictions, std::span<const Stance> golds) {
  return (micro_f1(predictions, golds) + macro_f1(predictions, golds)) / 2.0;
}

MetricReport score(std::span<const Stance> predictions, std::span<const Stance> golds, FavgClasses classes) {
  MetricReport r;
  r.per_class_f1 = f1_per_class(predictions, golds);
  r.f_avg = f_avg(predictions, golds, classes);
  r.micro_f1 = micro_f1(predictions, golds);
  r.macro_f1 = (r.per_class_f1[0] + r.per_class_f1[1] + r.per_class_f1[2]) / 3.0;
  r.f_m = (r.micro_f1 + r.macro_f1) / 2.0;
  r.n_examples = golds.size();
  return r;
}

MetricReport mean_report(std::span<const MetricReport> reports) {
  MetricReport m;
  if (reports.empty()) return m;
  const double n = static_cast<double>(reports.size());
  for (const auto& r : reports) {
    for (std::size_t c = 0; c < m.per_class_f1.size(); ++c) m.per_class_f1[c] += r.per_class_f1[c];
    m.f_avg += r.f_avg;
    m.f_m += r.f_m;
    m.micro_f1 += r.micro_f1;
    m.macro_f1 += r.macro_f1;
    m.n_examples += r.n_examples;
  }
  for (auto& v : m.per_class_f1) v /= n;
  m.f_avg /= n;
  m.f_m /= n;
  m.micro_f1 /= n;
  m.macro_f1 /= n;
  return m;
}

}  // namespace advstance
