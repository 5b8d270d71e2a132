#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "actauth/decision.hpp"
#include "actauth/events.hpp"

namespace actauth {

// Top-K visit-frequency model shared by APP and WEB.
class EntityModel {
 public:
  EntityModel() = default;
  EntityModel(Modality modality, std::vector<std::string> entities, std::vector<double> p_valid,
              std::vector<double> p_invalid, double epsilon, std::size_t k);

  Modality modality() const { return modality_; }
  const std::vector<std::string>& entities() const { return entities_; }
  const std::vector<double>& p_valid() const { return p_valid_; }
  const std::vector<double>& p_invalid() const { return p_invalid_; }
  double epsilon() const { return epsilon_; }
  std::size_t k() const { return k_; }
  std::size_t degree() const { return entities_.size(); }

  std::optional<std::size_t> find(const std::string& entity) const;

  // log P(x|H1) - log P(x|H0); nullopt for entities outside the model.
  std::optional<double> log_ratio(const std::string& entity) const;

 private:
  Modality modality_ = Modality::App;
  std::vector<std::string> entities_;
  std::vector<double> p_valid_;
  std::vector<double> p_invalid_;
  double epsilon_ = 1e-6;
  std::size_t k_ = 20;
  std::unordered_map<std::string, std::size_t> index_;
};

using EntityCounts = std::map<std::string, std::size_t>;

inline constexpr std::size_t kDefaultTopK = 20;
inline constexpr double kDefaultEpsilon = 1e-6;

// APP: the app name. WEB: the URL host, subdomains kept, lower-cased.
std::string extract_entity(const RawEvent& event);
std::string url_host(std::string_view url);

EntityModel train_entity(Modality modality, const EntityCounts& valid_counts, const EntityCounts& impostor_counts,
                         std::size_t k = kDefaultTopK, double epsilon = kDefaultEpsilon);

// Sum of per-event log ratios over in-model events; nullopt when none are in the model.
std::optional<double> window_log_ratio(const EntityModel& model, const Window& window);
Decision window_decide_entity(const EntityModel& model, const Window& window);

void save_entity_model(std::ostream& out, const EntityModel& model);
EntityModel load_entity_model(std::istream& in);

}  // namespace actauth
