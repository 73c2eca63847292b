// Copyright 2026 The fuse-ser Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <span>

namespace fuse_ser {

/// I_x(a, b) by the modified Lentz continued fraction, using the symmetry
/// I_x(a, b) = 1 - I_{1-x}(b, a) to stay in the fast-converging region.
double regularized_incomplete_beta(double a, double b, double x);

/// CDF of Student's t distribution with `df` degrees of freedom.
double student_t_cdf(double t, double df);

/// Two-sided p-value of |T| >= |t|.
double student_t_two_sided_p(double t, double df);

enum class TTestKind { kStudent, kWelch };

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  double df = 0.0;
  bool significant = false;
  /// Zero pooled variance with unequal means: t is infinite and p is reported as 0.
  bool p_limit_zero = false;
};

/// Two-sided independent two-sample t-test. Student's pooled-variance form by
/// default, Welch's unequal-variance form on request.
TTestResult ttest_independent(std::span<const double> a, std::span<const double> b,
                              TTestKind kind = TTestKind::kStudent, double alpha = 0.05);

}  // namespace fuse_ser
