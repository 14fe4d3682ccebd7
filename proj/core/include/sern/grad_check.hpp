#pragma once

#include <functional>
#include <span>

#include "sern/graph.hpp"

namespace sern {

/// Compares analytic gradients against central finite differences.
///
/// `forward` must build the loss on the graph it is given, reading the current
/// values of `params` (typically by staging them as leaves). It must be
/// deterministic: the harness evaluates it twice up front and raises a
/// ContractError if the two losses differ.
///
/// Returns max over all parameter entries of
///   |analytic - numeric| / max(1, |analytic|, |numeric|)
/// with numeric gradients from central differences of step `epsilon`.
double grad_check(const std::function<Var(Graph&)>& forward, std::span<Tensor* const> params,
                  double epsilon);

}  // namespace sern
