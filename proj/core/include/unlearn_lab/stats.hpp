#pragma once

#include <vector>

namespace unlearn_lab {

// Ranks starting at 1; tied values share their average rank.
std::vector<double> average_ranks(const std::vector<double>& values);

double pearson(const std::vector<double>& a, const std::vector<double>& b);

// Pearson correlation of average ranks.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

double mean(const std::vector<double>& values);
// Sample standard deviation (n - 1); 0 for fewer than two values.
double stddev(const std::vector<double>& values);

}  // namespace unlearn_lab
