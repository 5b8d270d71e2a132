#pragma once

#include <string_view>

namespace actauth {

// A detector's vote for one window. Values match the +1/-1 convention of the fusion rule.
enum class Decision : int { Reject = -1, Abstain = 0, Accept = 1 };

inline int sign(Decision d) { return static_cast<int>(d); }

inline std::string_view to_string(Decision d) {
  switch (d) {
    case Decision::Accept: return "+1";
    case Decision::Reject: return "-1";
    case Decision::Abstain: return "abstain";
  }
  return "?";
}

}  // namespace actauth
