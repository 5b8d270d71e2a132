#include "actauth/text_classifier.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <vector>

#include <fmt/format.h>

#include "model_io.hpp"

namespace actauth {

NGramProfile train_text(std::u32string_view keystrokes, std::size_t n) {
  std::u32string segment(keystrokes);
  return train_text(std::span<const std::u32string>(&segment, 1), n);
}

NGramProfile train_text(std::span<const std::u32string> segments, std::size_t n) {
  if (n == 0) throw std::invalid_argument("n-gram length must be at least 1");
  NGramProfile profile;
  profile.n = n;
  for (const auto& seg : segments) {
    for (std::size_t i = 0; i + n <= seg.size(); ++i) profile.grams.insert(seg.substr(i, n));
  }
  if (profile.grams.empty()) {
    throw InsufficientText(fmt::format("insufficient text: no segment reaches {} characters", n));
  }
  return profile;
}

std::optional<double> coverage_score(const NGramProfile& profile, std::u32string_view block) {
  const auto n = profile.n;
  if (block.size() < n) return std::nullopt;
  std::size_t tokens = block.size() - n + 1;
  std::size_t present = 0;
  std::u32string gram;
  for (std::size_t i = 0; i < tokens; ++i) {
    gram.assign(block.substr(i, n));
    present += profile.grams.count(gram);
  }
  return static_cast<double>(present) / static_cast<double>(tokens);
}

Decision decide_text(const NGramProfile& profile, std::u32string_view window_text) {
  auto score = coverage_score(profile, window_text);
  if (!score) return Decision::Abstain;
  return *score >= profile.theta ? Decision::Accept : Decision::Reject;
}

std::u32string window_text(const Window& window) {
  std::u32string out;
  for (const auto* e : window.events) {
    if (e->event.modality == Modality::Text) out += decode_utf8(e->event.text());
  }
  return out;
}

void save_profile(std::ostream& out, const NGramProfile& profile) {
  std::vector<std::string> grams;
  grams.reserve(profile.grams.size());
  for (const auto& g : profile.grams) grams.push_back(escape_field(encode_utf8(g)));
  std::sort(grams.begin(), grams.end());
  out << "ngram-profile v1\n";
  out << "n " << profile.n << '\n';
  out << "theta " << io::format_double(profile.theta) << '\n';
  out << "grams " << grams.size() << '\n';
  for (const auto& g : grams) out << g << '\n';
}

NGramProfile load_profile(std::istream& in) {
  io::LineReader r(in, "ngram-profile");
  r.expect_header("ngram-profile v1");
  NGramProfile p;
  p.n = r.keyed_size("n");
  p.theta = r.keyed_double("theta");
  auto count = r.keyed_size("grams");
  for (std::size_t i = 0; i < count; ++i) {
    auto gram = decode_utf8(unescape_field(r.next()));
    if (gram.size() != p.n) r.fail("gram length differs from n");
    p.grams.insert(std::move(gram));
  }
  return p;
}

}  // namespace actauth
