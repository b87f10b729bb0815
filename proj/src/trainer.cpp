#include "losstrunc/trainer.hpp"

#include <cmath>
#include <ostream>

#include "losstrunc/csv.hpp"

namespace losstrunc {

void TrainConfig::validate() const {
  if (!(c >= 0.0 && c < 1.0)) throw ConfigError("drop fraction c must lie in [0, 1)");
  if (total_steps == 0) throw ConfigError("total steps must be positive");
  if (hotstart_steps > total_steps) throw ConfigError("hotstart steps exceed total steps");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(hotstart_lr > 0.0) || !(truncated_lr > 0.0)) throw ConfigError("learning rates must be positive");
  if (window == 0 || bins == 0) throw ConfigError("window and bins must be positive");
}

const char* phase_name(Phase phase) { return phase == Phase::Hotstart ? "hotstart" : "truncated"; }

double TrainLog::dropped_fraction(std::size_t begin, std::size_t end) const {
  end = std::min(end, dropped.size());
  if (begin >= end) return 0.0;
  std::size_t n = 0;
  for (std::size_t i = begin; i < end; ++i) n += dropped[i] ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(end - begin);
}

std::size_t TrainLog::first_truncated_example() const {
  for (const Step& s : steps) {
    if (s.phase == Phase::Truncated) return s.first_example;
  }
  return losses.size();
}

std::vector<double> TrainLog::drop_rate_trace(std::size_t span) const {
  std::vector<double> trace;
  if (span == 0) return trace;
  for (std::size_t begin = first_truncated_example(); begin + span <= dropped.size(); begin += span) {
    trace.push_back(dropped_fraction(begin, begin + span));
  }
  return trace;
}

void TrainLog::write_csv(std::ostream& out) const {
  CsvWriter csv(out);
  csv.row({"step", "phase", "loss", "threshold", "dropped"});
  for (const Step& s : steps) {
    const std::string step = std::to_string(s.step);
    const std::string threshold = s.threshold ? format_double(*s.threshold) : std::string();
    for (std::size_t i = s.first_example; i < s.first_example + s.batch_size; ++i) {
      csv.row({step, phase_name(s.phase), format_double(losses[i]), threshold, dropped[i] ? "1" : "0"});
    }
  }
}

}  // namespace losstrunc
