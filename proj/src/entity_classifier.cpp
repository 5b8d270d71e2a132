#include "actauth/entity_classifier.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

#include "model_io.hpp"

namespace actauth {

namespace {

// Floors entries at epsilon and rescales the rest so the vector still sums to 1.
std::vector<double> floor_and_normalize(std::vector<double> counts, double epsilon) {
  const std::size_t k = counts.size();
  double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  std::vector<double> p(k, 0.0);
  if (total > 0.0) {
    for (std::size_t i = 0; i < k; ++i) p[i] = counts[i] / total;
  }
  std::vector<bool> floored(k, false);
  while (true) {
    double free_mass = 1.0;
    double free_sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      if (floored[i]) {
        free_mass -= epsilon;
      } else {
        free_sum += p[i];
      }
    }
    bool changed = false;
    for (std::size_t i = 0; i < k; ++i) {
      if (floored[i]) continue;
      double scaled = free_sum > 0.0 ? p[i] * free_mass / free_sum : 0.0;
      if (scaled < epsilon) {
        floored[i] = true;
        changed = true;
      }
    }
    if (!changed) {
      for (std::size_t i = 0; i < k; ++i) p[i] = floored[i] ? epsilon : p[i] * free_mass / free_sum;
      return p;
    }
    if (std::all_of(floored.begin(), floored.end(), [](bool f) { return f; })) {
      // Every entry under the floor: fall back to uniform.
      return std::vector<double>(k, 1.0 / static_cast<double>(k));
    }
  }
}

}  // namespace

EntityModel::EntityModel(Modality modality, std::vector<std::string> entities, std::vector<double> p_valid,
                         std::vector<double> p_invalid, double epsilon, std::size_t k)
    : modality_(modality),
      entities_(std::move(entities)),
      p_valid_(std::move(p_valid)),
      p_invalid_(std::move(p_invalid)),
      epsilon_(epsilon),
      k_(k) {
  if (modality_ != Modality::App && modality_ != Modality::Web) {
    throw ContractViolation("entity models cover APP and WEB only");
  }
  if (p_valid_.size() != entities_.size() || p_invalid_.size() != entities_.size()) {
    throw std::invalid_argument("entity model columns differ in length");
  }
  for (std::size_t i = 0; i < entities_.size(); ++i) {
    if (!index_.emplace(entities_[i], i).second) {
      throw std::invalid_argument(fmt::format("duplicate entity '{}'", entities_[i]));
    }
  }
}

std::optional<std::size_t> EntityModel::find(const std::string& entity) const {
  auto it = index_.find(entity);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<double> EntityModel::log_ratio(const std::string& entity) const {
  auto i = find(entity);
  if (!i) return std::nullopt;
  return std::log(p_valid_[*i]) - std::log(p_invalid_[*i]);
}

std::string url_host(std::string_view url) {
  auto rest = url;
  if (auto scheme = rest.find("://"); scheme != std::string_view::npos) rest.remove_prefix(scheme + 3);
  auto end = rest.find_first_of("/?#");
  auto authority = rest.substr(0, end);
  if (auto at = authority.rfind('@'); at != std::string_view::npos) authority.remove_prefix(at + 1);

  std::string_view host;
  if (!authority.empty() && authority.front() == '[') {
    auto close = authority.find(']');
    if (close == std::string_view::npos) throw std::invalid_argument(fmt::format("unparseable URL '{}'", url));
    host = authority.substr(0, close + 1);
  } else {
    auto colon = authority.find(':');
    host = authority.substr(0, colon);
    if (colon != std::string_view::npos) {
      auto port = authority.substr(colon + 1);
      if (!std::all_of(port.begin(), port.end(), [](unsigned char c) { return std::isdigit(c); })) {
        throw std::invalid_argument(fmt::format("unparseable URL '{}'", url));
      }
    }
    bool ok = !host.empty() && std::all_of(host.begin(), host.end(), [](unsigned char c) {
      return std::isalnum(c) || c == '-' || c == '.' || c == '_' || c >= 0x80;
    });
    if (!ok) throw std::invalid_argument(fmt::format("unparseable URL '{}'", url));
  }
  std::string out(host);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c); });
  return out;
}

std::string extract_entity(const RawEvent& event) {
  switch (event.modality) {
    case Modality::App: return event.text();
    case Modality::Web: return url_host(event.text());
    default: throw ContractViolation(fmt::format("no entity for {} events", to_string(event.modality)));
  }
}

EntityModel train_entity(Modality modality, const EntityCounts& valid_counts, const EntityCounts& impostor_counts,
                         std::size_t k, double epsilon) {
  if (valid_counts.empty()) throw std::invalid_argument("entity model needs at least one valid visit");
  if (k == 0) throw std::invalid_argument("K must be positive");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");

  // std::map iteration is lexicographic, so a stable sort by count breaks ties by name.
  std::vector<std::pair<std::string, std::size_t>> ranked(valid_counts.begin(), valid_counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > k) ranked.resize(k);

  std::vector<std::string> entities;
  std::vector<double> valid, invalid;
  for (const auto& [name, count] : ranked) {
    entities.push_back(name);
    valid.push_back(static_cast<double>(count));
    auto it = impostor_counts.find(name);
    invalid.push_back(it == impostor_counts.end() ? 0.0 : static_cast<double>(it->second));
  }
  return EntityModel(modality, std::move(entities), floor_and_normalize(std::move(valid), epsilon),
                     floor_and_normalize(std::move(invalid), epsilon), epsilon, k);
}

std::optional<double> window_log_ratio(const EntityModel& model, const Window& window) {
  double sum = 0.0;
  bool any = false;
  for (const auto* e : window.events) {
    if (e->event.modality != model.modality()) continue;
    std::string entity;
    try {
      entity = extract_entity(e->event);
    } catch (const std::invalid_argument&) {
      continue;
    }
    if (auto lr = model.log_ratio(entity)) {
      sum += *lr;
      any = true;
    }
  }
  if (!any) return std::nullopt;
  return sum;
}

Decision window_decide_entity(const EntityModel& model, const Window& window) {
  auto lr = window_log_ratio(model, window);
  if (!lr) return Decision::Abstain;
  return *lr >= 0.0 ? Decision::Accept : Decision::Reject;
}

void save_entity_model(std::ostream& out, const EntityModel& model) {
  out << "entity-model v1\n";
  out << "modality " << to_string(model.modality()) << '\n';
  out << "k " << model.k() << '\n';
  out << "epsilon " << io::format_double(model.epsilon()) << '\n';
  out << "entities " << model.degree() << '\n';
  for (std::size_t i = 0; i < model.degree(); ++i) {
    out << escape_field(model.entities()[i]) << '\t' << io::format_double(model.p_valid()[i]) << '\t'
        << io::format_double(model.p_invalid()[i]) << '\n';
  }
}

EntityModel load_entity_model(std::istream& in) {
  io::LineReader r(in, "entity");
  r.expect_header("entity-model v1");
  auto modality = parse_modality(r.keyed_string("modality"));
  if (!modality) r.fail("unknown modality");
  auto k = r.keyed_size("k");
  auto epsilon = r.keyed_double("epsilon");
  auto count = r.keyed_size("entities");
  std::vector<std::string> entities;
  std::vector<double> valid, invalid;
  for (std::size_t i = 0; i < count; ++i) {
    auto line = r.next();
    auto cols = io::split(line, '\t');
    if (cols.size() != 3) r.fail("expected entity, p_valid, p_invalid");
    entities.push_back(unescape_field(cols[0]));
    valid.push_back(r.to_double(cols[1]));
    invalid.push_back(r.to_double(cols[2]));
  }
  return EntityModel(*modality, std::move(entities), std::move(valid), std::move(invalid), epsilon, k);
}

}  // namespace actauth
