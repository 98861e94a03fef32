#pragma once

#include <string>
#include <vector>

#include "gradlab/optimizer.hpp"

namespace gradlab {

// Fixed CSV schema: t,f,grad_norm,alpha,lambda_min,f_test with empty cells
// for absent columns. Doubles are written with 17 significant digits so a
// read round-trips every value exactly.
void write_trace(const std::vector<TraceRecord>& trace, const std::string& path);
std::vector<TraceRecord> read_trace(const std::string& path);

std::string format_double(double v);  // shared 17-digit formatting

}  // namespace gradlab
