#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace gfm::nn {

// Central differences of f with respect to x[i] for each listed coordinate
// (every coordinate when `coords` is empty). x is restored afterwards.
std::vector<double> numeric_gradient(const std::function<double()>& f, std::span<double> x,
                                     double h = 1e-5, std::span<const std::size_t> coords = {});

// ||a - b|| / max(||a||, ||b||, floor); 0 when the denominator is zero.
double relative_error(std::span<const double> a, std::span<const double> b, double floor = 0.0);

}  // namespace gfm::nn
