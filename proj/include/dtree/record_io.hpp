#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dtree/coordinator.hpp"
#include "dtree/doubletree.hpp"

namespace dtree {

/// One JSON object per line. Non-responding slots are written as "*".
void write_records(std::ostream& out, const std::vector<TraceRecord>& records);
/// Throws std::runtime_error naming the offending line.
[[nodiscard]] std::vector<TraceRecord> read_records(std::istream& in);

[[nodiscard]] std::string record_to_json(const TraceRecord& rec);
[[nodiscard]] TraceRecord record_from_json(const std::string& line);

/// Per-monitor summaries (final state, h per window, probe counts,
/// transitions) as a single pretty-printed JSON document.
void write_summaries(std::ostream& out,
                     const std::vector<MonitorSummary>& monitors);
[[nodiscard]] std::vector<MonitorSummary> read_summaries(std::istream& in);

/// "from to sent_at window slice hex", one frame per line.
void write_message_log(std::ostream& out,
                       const std::vector<SentMessage>& messages);
[[nodiscard]] std::vector<SentMessage> read_message_log(std::istream& in);

}  // namespace dtree
