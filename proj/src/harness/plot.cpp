#include "handreg/harness/plot.hpp"

#include <deque>
#include <istream>
#include <ostream>
#include <sstream>

#include "handreg/common/error.hpp"
#include "handreg/common/key_value.hpp"

namespace handreg::harness {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string f; std::getline(ss, f, '\t');) out.push_back(f);
  return out;
}

}  // namespace

void write_pck_table(std::ostream& os, const EvalReport& report) {
  std::vector<const MethodResult*> rows;
  for (const auto& r : report.rows)
    if (!r.reference) rows.push_back(&r);
  HANDREG_THROW_IF(rows.empty(), ErrorCode::EmptyInput, "report has no measured rows");
  os << "threshold_mm";
  for (const auto* r : rows) os << '\t' << r->name;
  os << '\n';
  for (int i = 0; i < kPckSamples; ++i) {
    os << format_number(kAucMaxMm * i / (kPckSamples - 1));
    for (const auto* r : rows) os << '\t' << format_number(r->pck[i]);
    os << '\n';
  }
}

void write_loss_table(std::istream& metrics_log, std::ostream& os, int window) {
  std::string line;
  HANDREG_THROW_IF(!std::getline(metrics_log, line), ErrorCode::EmptyInput,
                   "metrics log is empty");
  const auto header = split_tabs(line);
  HANDREG_THROW_IF(header.size() < 3 || header[0] != "step" || header[2] != "total",
                   ErrorCode::Format, "not a metrics log header");
  std::ostringstream body;
  std::deque<double> recent;
  double sum = 0.0;
  std::size_t rows = 0;
  while (std::getline(metrics_log, line)) {
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    HANDREG_THROW_IF(f.size() != header.size(), ErrorCode::Format,
                     "metrics row with " + std::to_string(f.size()) + " fields");
    double total = 0.0;
    try {
      total = std::stod(f[2]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::Format, "bad total '" + f[2] + "'");
    }
    recent.push_back(total);
    sum += total;
    if (static_cast<int>(recent.size()) > window) {
      sum -= recent.front();
      recent.pop_front();
    }
    body << f[0] << '\t' << f[2] << '\t' << format_number(sum / recent.size());
    for (std::size_t i = 3; i < f.size(); ++i) body << '\t' << f[i];
    body << '\n';
    ++rows;
  }
  HANDREG_THROW_IF(rows == 0, ErrorCode::EmptyInput, "metrics log has no data rows");
  os << "step\ttotal\ttotal_smoothed";
  for (std::size_t i = 3; i < header.size(); ++i) os << '\t' << header[i];
  os << '\n' << body.str();
}

}  // namespace handreg::harness
