#pragma once

#include "advstance/data.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <string_view>

namespace advstance {

/// Which classes F_avg averages over.
enum class FavgClasses {
  stance_bearing,  // favor and against
  all,             // favor, against and none
};

FavgClasses parse_favg_classes(std::string_view text);

/// F1 per class in Stance order. A class with no true positives (including
/// one absent from both sequences) scores 0.
std::array<double, kNumStances> f1_per_class(std::span<const Stance> predictions, std::span<const Stance> golds);

double f_avg(std::span<const Stance> predictions, std::span<const Stance> golds,
             FavgClasses classes = FavgClasses::stance_bearing);
/// Global accuracy, which equals micro-averaged F1 for single-label data.
double micro_f1(std::span<const Stance> predictions, std::span<const Stance> golds);
double macro_f1(std::span<const Stance> predictions, std::span<const Stance> golds);
/// Mean of micro and macro F1.
double f_m(std::span<const Stance> predictions, std::span<const Stance> golds);

struct MetricReport {
  std::array<double, kNumStances> per_class_f1{};
  double f_avg = 0.0;
  double f_m = 0.0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  std::size_t n_examples = 0;
};

MetricReport score(std::span<const Stance> predictions, std::span<const Stance> golds,
                   FavgClasses classes = FavgClasses::stance_bearing);

/// Field-wise arithmetic mean; n_examples is summed.
MetricReport mean_report(std::span<const MetricReport> reports);

}  // namespace advstance
