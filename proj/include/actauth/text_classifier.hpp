#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>

#include "actauth/decision.hpp"
#include "actauth/events.hpp"

namespace actauth {

class InsufficientText : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Character n-grams seen in a user's raw keystroke stream.
struct NGramProfile {
  std::size_t n = 4;
  std::unordered_set<std::u32string> grams;
  double theta = 0.5;

  bool contains(std::u32string_view gram) const { return grams.count(std::u32string(gram)) != 0; }
};

NGramProfile train_text(std::u32string_view keystrokes, std::size_t n = 4);

// Grams are collected per segment; no gram spans two segments.
NGramProfile train_text(std::span<const std::u32string> segments, std::size_t n = 4);

// Fraction of the block's n-gram tokens present in the profile. nullopt when the block is shorter than n.
std::optional<double> coverage_score(const NGramProfile& profile, std::u32string_view block);

Decision decide_text(const NGramProfile& profile, std::u32string_view window_text);

// Concatenated TEXT payloads of a window, in timeline order.
std::u32string window_text(const Window& window);

void save_profile(std::ostream& out, const NGramProfile& profile);
NGramProfile load_profile(std::istream& in);

}  // namespace actauth
