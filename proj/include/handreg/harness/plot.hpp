#pragma once
// Plot-ready tab-separated tables.

#include <iosfwd>

#include "handreg/harness/evaluate.hpp"

namespace handreg::harness {

/// threshold_mm then one PCK column per measured method; 51 data rows.
void write_pck_table(std::ostream& os, const EvalReport& report);

/// step, total and a trailing moving average of total over `window` rows,
/// followed by every term column of the metrics log. Throws EmptyInput when
/// the log holds no data rows.
void write_loss_table(std::istream& metrics_log, std::ostream& os, int window = 50);

}  // namespace handreg::harness
