#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace actauth {

using Seconds = std::int64_t;

enum class Modality { Text = 0, App = 1, Web = 2, Location = 3 };

inline constexpr std::size_t kModalityCount = 4;
inline constexpr Modality kAllModalities[kModalityCount] = {Modality::Text, Modality::App,
                                                            Modality::Web, Modality::Location};

std::string_view to_string(Modality m);
std::optional<Modality> parse_modality(std::string_view tag);
inline std::size_t index_of(Modality m) { return static_cast<std::size_t>(m); }

// Raised when a caller breaks a documented precondition (e.g. unsorted input).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

bool valid_geo(const GeoPoint& p);

// TEXT: one UTF-8 encoded character. APP: app name. WEB: full URL.
using Payload = std::variant<std::string, GeoPoint>;

struct RawEvent {
  std::string user_id;
  Seconds wall_time = 0;
  Modality modality = Modality::Text;
  Payload payload;

  const std::string& text() const { return std::get<std::string>(payload); }
  const GeoPoint& location() const { return std::get<GeoPoint>(payload); }

  friend bool operator==(const RawEvent&, const RawEvent&) = default;
};

struct TimedEvent {
  RawEvent event;
  Seconds active_time = 0;
};

struct IdlePolicy {
  Seconds threshold = 300;
  Seconds cap = 300;
};

// Events on the compressed ("active interaction") time axis. Immutable once built.
class ActiveTimeline {
 public:
  ActiveTimeline() = default;
  explicit ActiveTimeline(std::vector<TimedEvent> events);

  std::span<const TimedEvent> events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }
  Seconds total_active_duration() const;

  // Positions into events() of one modality, ascending.
  std::span<const std::size_t> positions(Modality m) const { return by_modality_[index_of(m)]; }

  // Events whose active time falls in [begin, end), or [begin, end] when `closed_end`.
  ActiveTimeline slice(Seconds begin, Seconds end, bool closed_end = false) const;

 private:
  std::vector<TimedEvent> events_;
  std::vector<std::size_t> by_modality_[kModalityCount];
};

struct Window {
  Seconds t_now = 0;
  Seconds omega = 0;
  std::vector<const TimedEvent*> events;
};

// ---- Ingestion ---------------------------------------------------------------

struct IngestError {
  std::size_t line = 0;
  std::string message;
};

struct Dataset {
  std::map<std::string, std::vector<RawEvent>> users;
  std::vector<IngestError> errors;
};

// Reads the tab separated event log. Malformed records are reported, not fatal.
Dataset ingest_log(std::istream& in);
Dataset ingest_log_file(const std::string& path);

// Parses one record; throws std::invalid_argument with a reason on malformed input.
RawEvent parse_event_line(std::string_view line);
std::string format_event_line(const RawEvent& e);
void write_log(std::ostream& out, std::span<const RawEvent> events);

// Backslash escaping for tab, newline, carriage return and backslash.
std::string escape_field(std::string_view s);
std::string unescape_field(std::string_view s);

// ---- Time axes ---------------------------------------------------------------

// Active-time stamps for a non-decreasing sequence of wall times.
std::vector<Seconds> compress_gaps(std::span<const Seconds> wall_times, IdlePolicy policy = {});

ActiveTimeline compress_idle(std::span<const RawEvent> events, IdlePolicy policy = {});

// Applies the compression again on the active axis; a no-op for policies with cap <= threshold.
ActiveTimeline recompress(const ActiveTimeline& timeline, IdlePolicy policy = {});

// Events with active time in [t_now - omega, t_now], optionally of one modality.
Window window_at(const ActiveTimeline& timeline, Seconds t_now, Seconds omega,
                 std::optional<Modality> modality = std::nullopt);

// ---- UTF-8 -------------------------------------------------------------------

std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view s);

}  // namespace actauth
