#pragma once

#include "ahflow/kernels.hpp"

namespace ahflow::kernels::scalar {
void apply_edge_rows(const StencilPlan& plan, const double* f, double* out);
}
