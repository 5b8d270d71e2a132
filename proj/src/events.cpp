#include "actauth/events.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/format.h>

namespace actauth {

namespace {

constexpr std::string_view kModalityTags[kModalityCount] = {"TEXT", "APP", "WEB", "LOCATION"};

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_double(std::string_view s, const char* what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw std::invalid_argument(fmt::format("malformed {} '{}'", what, s));
  }
  return v;
}

}  // namespace

std::string_view to_string(Modality m) { return kModalityTags[index_of(m)]; }

std::optional<Modality> parse_modality(std::string_view tag) {
  for (auto m : kAllModalities) {
    if (kModalityTags[index_of(m)] == tag) return m;
  }
  return std::nullopt;
}

bool valid_geo(const GeoPoint& p) {
  return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 && p.lat <= 90.0 &&
         p.lon >= -180.0 && p.lon <= 180.0;
}

// ---- ActiveTimeline ----------------------------------------------------------

ActiveTimeline::ActiveTimeline(std::vector<TimedEvent> events) : events_(std::move(events)) {
  for (std::size_t i = 0; i < events_.size(); ++i) {
    if (i > 0 && events_[i].active_time < events_[i - 1].active_time) {
      throw ContractViolation("active timeline must be ordered by active time");
    }
    by_modality_[index_of(events_[i].event.modality)].push_back(i);
  }
}

Seconds ActiveTimeline::total_active_duration() const {
  if (events_.empty()) return 0;
  return events_.back().active_time - events_.front().active_time;
}

ActiveTimeline ActiveTimeline::slice(Seconds begin, Seconds end, bool closed_end) const {
  auto lo = std::lower_bound(events_.begin(), events_.end(), begin,
                             [](const TimedEvent& e, Seconds t) { return e.active_time < t; });
  auto hi = closed_end
                ? std::upper_bound(lo, events_.end(), end,
                                   [](Seconds t, const TimedEvent& e) { return t < e.active_time; })
                : std::lower_bound(lo, events_.end(), end,
                                   [](const TimedEvent& e, Seconds t) { return e.active_time < t; });
  return ActiveTimeline(std::vector<TimedEvent>(lo, hi));
}

// ---- Escaping ----------------------------------------------------------------

std::string escape_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (++i == s.size()) throw std::invalid_argument("dangling escape");
    switch (s[i]) {
      case '\\': out += '\\'; break;
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      default: throw std::invalid_argument(fmt::format("unknown escape '\\{}'", s[i]));
    }
  }
  return out;
}

// ---- UTF-8 -------------------------------------------------------------------

std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    auto b = static_cast<unsigned char>(s[i]);
    int len = b < 0x80 ? 1 : (b >> 5) == 0x6 ? 2 : (b >> 4) == 0xE ? 3 : (b >> 3) == 0x1E ? 4 : 0;
    if (len == 0 || i + len > s.size()) throw std::invalid_argument("invalid UTF-8");
    char32_t cp = len == 1 ? b : len == 2 ? (b & 0x1F) : len == 3 ? (b & 0x0F) : (b & 0x07);
    for (int k = 1; k < len; ++k) {
      auto c = static_cast<unsigned char>(s[i + k]);
      if ((c & 0xC0) != 0x80) throw std::invalid_argument("invalid UTF-8");
      cp = (cp << 6) | (c & 0x3F);
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string encode_utf8(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t cp : s) {
    if (cp < 0x80) {
      out += static_cast<char>(cp);
    } else if (cp < 0x800) {
      out += static_cast<char>(0xC0 | (cp >> 6));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
      out += static_cast<char>(0xE0 | (cp >> 12));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
      out += static_cast<char>(0xF0 | (cp >> 18));
      out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    }
  }
  return out;
}

// ---- Log records -------------------------------------------------------------

RawEvent parse_event_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  auto fields = split_tabs(line);
  if (fields.size() != 4) {
    throw std::invalid_argument(fmt::format("expected 4 tab-separated fields, got {}", fields.size()));
  }
  RawEvent e;
  e.user_id = unescape_field(fields[0]);
  if (e.user_id.empty()) throw std::invalid_argument("empty user_id");

  auto ts = fields[1];
  auto [ptr, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), e.wall_time);
  if (ec != std::errc() || ptr != ts.data() + ts.size()) {
    throw std::invalid_argument(fmt::format("malformed timestamp '{}'", ts));
  }

  auto modality = parse_modality(fields[2]);
  if (!modality) throw std::invalid_argument(fmt::format("unknown modality '{}'", fields[2]));
  e.modality = *modality;

  auto payload = fields[3];
  switch (e.modality) {
    case Modality::Text: {
      auto ch = unescape_field(payload);
      if (decode_utf8(ch).size() != 1) throw std::invalid_argument("TEXT payload must be one character");
      e.payload = std::move(ch);
      break;
    }
    case Modality::App:
    case Modality::Web: {
      auto s = unescape_field(payload);
      if (s.empty()) throw std::invalid_argument("empty payload");
      e.payload = std::move(s);
      break;
    }
    case Modality::Location: {
      auto comma = payload.find(',');
      if (comma == std::string_view::npos) throw std::invalid_argument("LOCATION payload must be 'lat,lon'");
      GeoPoint p{parse_double(payload.substr(0, comma), "latitude"),
                 parse_double(payload.substr(comma + 1), "longitude")};
      if (p.lat < -90.0 || p.lat > 90.0) throw std::invalid_argument(fmt::format("latitude {} out of range", p.lat));
      if (p.lon < -180.0 || p.lon > 180.0) throw std::invalid_argument(fmt::format("longitude {} out of range", p.lon));
      e.payload = p;
      break;
    }
  }
  return e;
}

std::string format_event_line(const RawEvent& e) {
  std::string payload;
  if (e.modality == Modality::Location) {
    payload = fmt::format("{},{}", e.location().lat, e.location().lon);
  } else {
    payload = escape_field(e.text());
  }
  return fmt::format("{}\t{}\t{}\t{}", escape_field(e.user_id), e.wall_time, to_string(e.modality), payload);
}

void write_log(std::ostream& out, std::span<const RawEvent> events) {
  for (const auto& e : events) out << format_event_line(e) << '\n';
}

Dataset ingest_log(std::istream& in) {
  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    try {
      auto e = parse_event_line(line);
      ds.users[e.user_id].push_back(std::move(e));
    } catch (const std::invalid_argument& err) {
      ds.errors.push_back({lineno, err.what()});
    }
  }
  for (auto& [user, events] : ds.users) {
    std::stable_sort(events.begin(), events.end(),
                     [](const RawEvent& a, const RawEvent& b) { return a.wall_time < b.wall_time; });
  }
  return ds;
}

Dataset ingest_log_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open event log '{}'", path));
  return ingest_log(in);
}

// ---- Compression & windows ---------------------------------------------------

std::vector<Seconds> compress_gaps(std::span<const Seconds> wall_times, IdlePolicy policy) {
  std::vector<Seconds> active(wall_times.size());
  for (std::size_t i = 1; i < wall_times.size(); ++i) {
    Seconds gap = wall_times[i] - wall_times[i - 1];
    if (gap < 0) throw ContractViolation("events must be sorted by wall time");
    if (gap > policy.threshold) gap = std::min(gap, policy.cap);
    active[i] = active[i - 1] + gap;
  }
  return active;
}

ActiveTimeline compress_idle(std::span<const RawEvent> events, IdlePolicy policy) {
  std::vector<Seconds> wall(events.size());
  std::transform(events.begin(), events.end(), wall.begin(), [](const RawEvent& e) { return e.wall_time; });
  auto active = compress_gaps(wall, policy);
  std::vector<TimedEvent> timed;
  timed.reserve(events.size());
  for (std::size_t i = 0; i < events.size(); ++i) timed.push_back({events[i], active[i]});
  return ActiveTimeline(std::move(timed));
}

ActiveTimeline recompress(const ActiveTimeline& timeline, IdlePolicy policy) {
  auto events = timeline.events();
  std::vector<Seconds> times(events.size());
  std::transform(events.begin(), events.end(), times.begin(), [](const TimedEvent& e) { return e.active_time; });
  auto active = compress_gaps(times, policy);
  std::vector<TimedEvent> timed;
  timed.reserve(events.size());
  Seconds origin = events.empty() ? 0 : events.front().active_time;
  for (std::size_t i = 0; i < events.size(); ++i) timed.push_back({events[i].event, origin + active[i]});
  return ActiveTimeline(std::move(timed));
}

Window window_at(const ActiveTimeline& timeline, Seconds t_now, Seconds omega, std::optional<Modality> modality) {
  if (omega <= 0) throw ContractViolation("window length must be positive");
  Window w{t_now, omega, {}};
  auto events = timeline.events();
  auto lo = std::lower_bound(events.begin(), events.end(), t_now - omega,
                             [](const TimedEvent& e, Seconds t) { return e.active_time < t; });
  auto hi = std::upper_bound(lo, events.end(), t_now,
                             [](Seconds t, const TimedEvent& e) { return t < e.active_time; });
  for (auto it = lo; it != hi; ++it) {
    if (!modality || it->event.modality == *modality) w.events.push_back(&*it);
  }
  return w;
}

}  // namespace actauth
