#include "gradlab/trace_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gradlab {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_trace(const std::vector<TraceRecord>& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary: byte-stable newlines
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "t,f,grad_norm,alpha,lambda_min,f_test\n";
  for (const auto& r : trace) {
    out << r.t << ',' << format_double(r.f) << ',' << format_double(r.grad_norm) << ','
        << format_double(r.alpha) << ',';
    if (r.lambda_min) out << format_double(*r.lambda_min);
    out << ',';
    if (r.f_test) out << format_double(*r.f_test);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<TraceRecord> read_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty trace file: " + path);
  if (line != "t,f,grad_norm,alpha,lambda_min,f_test")
    throw std::runtime_error("unexpected trace header in " + path);

  std::vector<TraceRecord> trace;
  double min_seen = std::numeric_limits<double>::infinity();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    cells.resize(6);
    TraceRecord r;
    r.t = std::strtoll(cells[0].c_str(), nullptr, 10);
    r.f = std::strtod(cells[1].c_str(), nullptr);
    r.grad_norm = std::strtod(cells[2].c_str(), nullptr);
    r.alpha = std::strtod(cells[3].c_str(), nullptr);
    if (!cells[4].empty()) r.lambda_min = std::strtod(cells[4].c_str(), nullptr);
    if (!cells[5].empty()) r.f_test = std::strtod(cells[5].c_str(), nullptr);
    min_seen = std::min(min_seen, r.grad_norm);
    r.grad_norm_min = min_seen;
    trace.push_back(r);
  }
  return trace;
}

}  // namespace gradlab
