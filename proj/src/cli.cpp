#include "actauth/cli.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "actauth/evaluation.hpp"
#include "actauth/synth.hpp"

namespace actauth::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// Configuration problems detected after parsing (exit code 2).
class BadConfig : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr const char* kVersion = "1.0.0";
constexpr const char* kEventsFile = "events.tsv";
constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kModelIndex = "models.tsv";

void write_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("cannot write {}", tmp.string()));
    out << content;
    if (!out.flush()) throw std::runtime_error(fmt::format("write failed: {}", tmp.string()));
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot read {}", path.string()));
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
}

// Hashes of every regular file in `dir` except the manifest, by relative path.
json artifact_hashes(const fs::path& dir) {
  std::vector<std::string> names;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto rel = fs::relative(entry.path(), dir).generic_string();
    if (rel == kManifestFile || rel.ends_with(".tmp")) continue;
    names.push_back(rel);
  }
  std::sort(names.begin(), names.end());
  json out = json::object();
  for (const auto& n : names) out[n] = sha256_file((dir / n).string());
  return out;
}

void write_manifest(const fs::path& dir, const std::string& command, const json& config, const json& inputs) {
  json m;
  m["tool"] = "actauth";
  m["version"] = kVersion;
  m["command"] = command;
  m["config"] = config;
  m["inputs"] = inputs;
  m["artifacts"] = artifact_hashes(dir);
  write_atomic(dir / kManifestFile, m.dump(2) + "\n");
}

json input_hash(const std::string& path) {
  json in = json::object();
  in[fs::path(path).filename().string()] = sha256_file(path);
  return in;
}

std::string env_name(const std::string& flag) {
  std::string out = kEnvPrefix;
  for (char c : flag) out += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

void bind_env(CLI::App& app) {
  for (auto* opt : app.get_options()) {
    const auto& names = opt->get_lnames();
    if (names.empty() || names.front() == "help") continue;
    opt->envname(env_name(names.front()));
  }
}

int thread_count(int jobs) {
#ifdef _OPENMP
  return jobs > 0 ? jobs : omp_get_max_threads();
#else
  (void)jobs;
  return 1;
#endif
}

// ---- Flags shared by the model-building subcommands ----------------------------

struct ModelFlags {
  std::string dataset;
  Seconds idle_threshold = 300;
  Seconds idle_cap = 300;
  std::size_t ngram = 4;
  std::size_t top_k = 20;
  double epsilon = 1e-6;
  double svm_c = 1.0;
  std::optional<double> svm_gamma;
  std::size_t impostor_ratio = 10;
  std::uint64_t seed = 1;
  int jobs = 0;
};

void add_model_flags(CLI::App* sub, ModelFlags& f) {
  sub->add_option("--dataset", f.dataset, "Event log")->required()->check(CLI::ExistingFile);
  sub->add_option("--idle-threshold-secs", f.idle_threshold, "Wall gaps above this are idle")->capture_default_str();
  sub->add_option("--idle-cap-secs", f.idle_cap, "Active length of an idle gap")->capture_default_str();
  sub->add_option("--ngram", f.ngram, "Character n-gram length")->capture_default_str();
  sub->add_option("--top-k", f.top_k, "Entities kept by the app/web models")->capture_default_str();
  sub->add_option("--epsilon", f.epsilon, "Probability floor of the entity models")->capture_default_str();
  sub->add_option("--svm-c", f.svm_c, "SVM box constraint")->capture_default_str();
  sub->add_option("--svm-gamma", f.svm_gamma, "RBF width (median heuristic when unset)");
  sub->add_option("--impostor-ratio", f.impostor_ratio, "Impostor location points per valid point")
      ->capture_default_str();
  sub->add_option("--seed", f.seed, "Global seed")->capture_default_str();
  sub->add_option("--jobs", f.jobs, "Worker threads (0: all cores)")->capture_default_str();
}

eval::EvalConfig to_eval_config(const ModelFlags& f) {
  if (f.idle_threshold <= 0 || f.idle_cap <= 0) throw BadConfig("idle threshold and cap must be positive");
  if (f.ngram == 0) throw BadConfig("--ngram must be at least 1");
  if (f.top_k == 0) throw BadConfig("--top-k must be at least 1");
  if (!(f.epsilon > 0.0 && f.epsilon < 1.0)) throw BadConfig("--epsilon must lie in (0, 1)");
  if (!(f.svm_c > 0.0)) throw BadConfig("--svm-c must be positive");
  if (f.svm_gamma && !(*f.svm_gamma > 0.0)) throw BadConfig("--svm-gamma must be positive");
  if (f.impostor_ratio == 0) throw BadConfig("--impostor-ratio must be at least 1");
  if (f.jobs < 0) throw BadConfig("--jobs must be non-negative");
  eval::EvalConfig c;
  c.idle = {f.idle_threshold, f.idle_cap};
  c.ngram = f.ngram;
  c.top_k = f.top_k;
  c.epsilon = f.epsilon;
  c.svm.c = f.svm_c;
  c.svm.gamma = f.svm_gamma;
  c.impostor_ratio = f.impostor_ratio;
  c.seed = f.seed;
  c.jobs = f.jobs;
  return c;
}

json model_flags_json(const ModelFlags& f) {
  json j;
  j["dataset"] = fs::path(f.dataset).filename().string();
  j["idle_threshold_secs"] = f.idle_threshold;
  j["idle_cap_secs"] = f.idle_cap;
  j["ngram"] = f.ngram;
  j["top_k"] = f.top_k;
  j["epsilon"] = f.epsilon;
  j["svm_c"] = f.svm_c;
  j["svm_gamma"] = f.svm_gamma ? json(*f.svm_gamma) : json(nullptr);
  j["impostor_ratio"] = f.impostor_ratio;
  j["seed"] = f.seed;
  return j;
}

std::vector<Seconds> checked_windows(const std::vector<Seconds>& windows) {
  if (windows.empty()) throw BadConfig("at least one window size is required");
  std::set<Seconds> seen;
  for (Seconds w : windows) {
    if (w <= 0) throw BadConfig(fmt::format("window size {} is not positive", w));
    if (!seen.insert(w).second) throw BadConfig(fmt::format("window size {} given twice", w));
  }
  return windows;
}

Dataset load_dataset(const std::string& path, std::ostream& err) {
  auto data = ingest_log_file(path);
  for (const auto& e : data.errors) err << fmt::format("{}:{}: {}\n", path, e.line, e.message);
  if (data.users.size() < 2) {
    throw BadConfig(fmt::format("{} holds {} user(s); at least two are needed for an impostor pool", path,
                                data.users.size()));
  }
  return data;
}

// ---- generate ------------------------------------------------------------------

struct GenerateFlags {
  std::size_t users = 20;
  double hours = 72.0;
  std::uint64_t seed = 1;
  double overlap = 0.0;
  double rate_dispersion = 0.0;
  std::string out;
};

int cmd_generate(const GenerateFlags& f, std::ostream& out) {
  if (f.users < 2) throw BadConfig("--users must be at least 2 (the impostor pool would be empty)");
  if (!(f.hours > 0.0)) throw BadConfig("--hours must be positive");
  if (!(f.overlap >= 0.0 && f.overlap <= 1.0)) throw BadConfig("--overlap must lie in [0, 1]");
  if (!(f.rate_dispersion >= 0.0)) throw BadConfig("--rate-dispersion must be non-negative");

  synth::SynthConfig config;
  config.n_users = f.users;
  config.active_hours = f.hours;
  config.seed = f.seed;
  config.overlap = f.overlap;
  config.rate_dispersion = f.rate_dispersion;
  const auto population = synth::generate_population(config);

  const fs::path dir(f.out);
  ensure_directory(dir);
  std::ostringstream log;
  const auto events = synth::merged_log(population);
  write_log(log, events);
  write_atomic(dir / kEventsFile, log.str());

  json c;
  c["users"] = f.users;
  c["active_hours"] = f.hours;
  c["seed"] = f.seed;
  c["overlap"] = f.overlap;
  c["rate_dispersion"] = f.rate_dispersion;
  c["rates_per_hour"] = config.rates;
  c["app_vocab"] = config.app_vocab;
  c["web_vocab"] = config.web_vocab;
  c["zipf_exponent"] = config.zipf_exponent;
  c["text_concentration"] = config.text_concentration;
  c["city_center"] = {config.city_center.lat, config.city_center.lon};
  c["city_radius_deg"] = config.city_radius_deg;
  c["anchor_sigma_deg"] = config.anchor_sigma_deg;
  c["min_anchor_separation_deg"] = config.min_anchor_separation_deg;
  c["errand_probability"] = config.errand_probability;
  c["mean_session_minutes"] = config.mean_session_minutes;
  c["start_time"] = config.start_time;
  write_manifest(dir, "generate", c, json::object());
  out << fmt::format("wrote {} events for {} users to {}\n", events.size(), f.users, (dir / kEventsFile).string());
  return kExitOk;
}

// ---- train ---------------------------------------------------------------------

struct TrainFlags {
  ModelFlags model;
  int experiment = 1;
  std::string model_dir;
};

std::string model_stem(std::size_t index) { return fmt::format("u{:04d}", index); }

int cmd_train(const TrainFlags& f, std::ostream& out, std::ostream& err) {
  if (f.experiment < 1 || f.experiment > eval::kExperiments) throw BadConfig("--experiment must be in 1..5");
  const auto config = to_eval_config(f.model);
  const auto data = load_dataset(f.model.dataset, err);
  std::vector<std::string> notes;
  const auto users = eval::prepare_users(data.users, config.idle, notes);
  if (users.size() < 2) throw std::runtime_error("fewer than two users have enough activity to train");

  const fs::path dir(f.model_dir);
  ensure_directory(dir);
  const auto n = static_cast<long>(users.size());
  std::vector<std::array<std::string, kModalityCount>> files(users.size());
  std::vector<std::array<std::string, kModalityCount>> failures(users.size());
  std::vector<std::string> errors(users.size());
#pragma omp parallel for schedule(dynamic) num_threads(thread_count(config.jobs))
  for (long i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    try {
      auto models = eval::train_user_models(users, u, f.experiment - 1, config, failures[u]);
      const auto stem = model_stem(u);
      auto save = [&](Modality m, const auto& saver) {
        std::ostringstream s;
        saver(s);
        files[u][index_of(m)] = fmt::format("{}.{}.model", stem, to_string(m));
        write_atomic(dir / files[u][index_of(m)], s.str());
      };
      if (models.text) save(Modality::Text, [&](std::ostream& s) { save_profile(s, *models.text); });
      if (models.app) save(Modality::App, [&](std::ostream& s) { save_entity_model(s, *models.app); });
      if (models.web) save(Modality::Web, [&](std::ostream& s) { save_entity_model(s, *models.web); });
      if (models.location) save(Modality::Location, [&](std::ostream& s) { save_location_model(s, *models.location); });
    } catch (const std::exception& e) {
      errors[u] = e.what();
    }
  }

  std::string index = "user\tTEXT\tAPP\tWEB\tLOCATION\n";
  for (std::size_t u = 0; u < users.size(); ++u) {
    if (!errors[u].empty()) throw std::runtime_error(fmt::format("training user {} failed: {}", users[u].id, errors[u]));
    index += escape_field(users[u].id);
    for (std::size_t k = 0; k < kModalityCount; ++k) {
      index += '\t';
      index += files[u][k].empty() ? "-" : files[u][k];
      if (!failures[u][k].empty()) {
        notes.push_back(fmt::format("user {}: {} unsupported: {}", users[u].id, to_string(kAllModalities[k]),
                                    failures[u][k]));
      }
    }
    index += '\n';
  }
  write_atomic(dir / kModelIndex, index);
  std::string note_text;
  for (const auto& note : notes) note_text += note + "\n";
  write_atomic(dir / "notes.txt", note_text);

  auto c = model_flags_json(f.model);
  c["experiment"] = f.experiment;
  write_manifest(dir, "train", c, input_hash(f.model.dataset));
  for (const auto& note : notes) err << note << '\n';
  out << fmt::format("trained {} users (experiment {}) into {}\n", users.size(), f.experiment, dir.string());
  return kExitOk;
}

// ---- characterize --------------------------------------------------------------

struct CharacterizeFlags {
  std::string dataset;
  std::string model_dir;
  std::string out;
  std::vector<Seconds> windows = eval::EvalConfig{}.windows;
  int jobs = 0;
};

UserModels load_models(const fs::path& dir, const std::array<std::string, kModalityCount>& files) {
  UserModels models;
  auto open = [&](std::size_t k) {
    std::istringstream in(read_file(dir / files[k]));
    return in;
  };
  if (files[0] != "-") {
    auto in = open(0);
    models.text = load_profile(in);
  }
  if (files[1] != "-") {
    auto in = open(1);
    models.app = load_entity_model(in);
  }
  if (files[2] != "-") {
    auto in = open(2);
    models.web = load_entity_model(in);
  }
  if (files[3] != "-") {
    auto in = open(3);
    models.location = load_location_model(in);
  }
  return models;
}

int cmd_characterize(const CharacterizeFlags& f, std::ostream& out, std::ostream& err) {
  const auto windows = checked_windows(f.windows);
  if (f.jobs < 0) throw BadConfig("--jobs must be non-negative");
  const fs::path model_dir(f.model_dir);
  const auto manifest = json::parse(read_file(model_dir / kManifestFile));
  const auto& mc = manifest.at("config");
  const int experiment = mc.at("experiment").get<int>() - 1;
  const IdlePolicy idle{mc.at("idle_threshold_secs").get<Seconds>(), mc.at("idle_cap_secs").get<Seconds>()};

  const auto data = load_dataset(f.dataset, err);
  std::vector<std::string> notes;
  const auto users = eval::prepare_users(data.users, idle, notes);

  std::map<std::string, std::array<std::string, kModalityCount>> index;
  {
    std::istringstream in(read_file(model_dir / kModelIndex));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<std::string> cols;
      std::stringstream ss(line);
      std::string col;
      while (std::getline(ss, col, '\t')) cols.push_back(col);
      if (cols.size() != 1 + kModalityCount) throw std::runtime_error(fmt::format("malformed {}", kModelIndex));
      index[unescape_field(cols[0])] = {cols[1], cols[2], cols[3], cols[4]};
    }
  }

  const auto roles = eval::rotation(experiment);
  const auto fold = static_cast<std::size_t>(roles.characterize);
  const auto n = static_cast<long>(users.size());
  std::vector<std::string> rows(users.size());
  std::vector<std::string> errors(users.size());
#pragma omp parallel for schedule(dynamic) num_threads(thread_count(f.jobs))
  for (long i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    try {
      auto it = index.find(users[u].id);
      if (it == index.end()) throw std::runtime_error("no trained models");
      auto models = load_models(model_dir, it->second);
      const auto& genuine = users[u].folds[fold];
      std::vector<ActiveTimeline> impostors;
      std::vector<std::pair<Seconds, Seconds>> spans;
      for (std::size_t b = 0; b < users.size(); ++b) {
        if (b == u) continue;
        impostors.push_back(users[b].folds[fold].slice);
        spans.emplace_back(users[b].folds[fold].begin, users[b].folds[fold].end);
      }
      for (Seconds omega : windows) {
        for (auto m : kAllModalities) {
          std::string theta = "NA";
          if (m == Modality::Text && models.text) {
            std::vector<double> gen, imp;
            for (Seconds t : eval::decision_points(genuine.begin, genuine.end, omega)) {
              if (auto s = eval::window_score(models, m, genuine.slice, t, omega)) gen.push_back(*s);
            }
            for (std::size_t k = 0; k < impostors.size(); ++k) {
              for (Seconds t : eval::decision_points(spans[k].first, spans[k].second, omega)) {
                if (auto s = eval::window_score(models, m, impostors[k], t, omega)) imp.push_back(*s);
              }
            }
            models.text->theta = eval::tune_threshold(gen, imp);
            theta = fmt::format("{:.6f}", models.text->theta);
          }
          auto est = eval::characterize(models, m, genuine.slice, {genuine.begin, genuine.end}, impostors, spans, omega);
          rows[u] += fmt::format("{}\t{}\t{}\t{:.6f}\t{:.6f}\t{}\t{}\t{}\t{}\n", escape_field(users[u].id), omega,
                                 to_string(m), est.far, est.frr, est.n_genuine, est.n_impostor, theta,
                                 est.supported() ? "supported" : "unsupported");
        }
      }
    } catch (const std::exception& e) {
      errors[u] = e.what();
    }
  }

  std::string table = "user\tomega_s\tmodality\tfar\tfrr\tn_genuine\tn_impostor\ttheta\tstatus\n";
  for (std::size_t u = 0; u < users.size(); ++u) {
    if (!errors[u].empty()) {
      throw std::runtime_error(fmt::format("characterizing user {} failed: {}", users[u].id, errors[u]));
    }
    table += rows[u];
  }
  const fs::path dir(f.out.empty() ? f.model_dir : f.out);
  ensure_directory(dir);
  write_atomic(dir / "characterization.tsv", table);
  if (!f.out.empty()) {
    json c;
    c["experiment"] = experiment + 1;
    c["windows"] = windows;
    c["model_manifest"] = sha256_file((model_dir / kManifestFile).string());
    write_manifest(dir, "characterize", c, input_hash(f.dataset));
  }
  for (const auto& note : notes) err << note << '\n';
  out << fmt::format("characterized {} users on fold {} into {}\n", users.size(), fold + 1,
                     (dir / "characterization.tsv").string());
  return kExitOk;
}

// ---- evaluate ------------------------------------------------------------------

struct EvaluateFlags {
  ModelFlags model;
  std::string out;
  std::vector<Seconds> windows = eval::EvalConfig{}.windows;
  std::vector<Seconds> trace_windows = eval::EvalConfig{}.trace_windows;
  double tau_min = -40.0;
  double tau_max = 40.0;
  double tau_step = 0.05;
  bool reference = false;
};

int cmd_evaluate(const EvaluateFlags& f, std::ostream& out, std::ostream& err) {
  auto config = to_eval_config(f.model);
  config.windows = checked_windows(f.windows);
  config.trace_windows = f.trace_windows;
  if (!(f.tau_step > 0.0) || !(f.tau_max >= f.tau_min)) throw BadConfig("invalid --tau-min/--tau-max/--tau-step");
  config.tau_min = f.tau_min;
  config.tau_max = f.tau_max;
  config.tau_step = f.tau_step;
  config.reference_windows = f.reference;

  const auto data = load_dataset(f.model.dataset, err);
  auto report = eval::evaluate(data.users, config);
  const fs::path dir(f.out);
  eval::write_report(dir.string(), report);

  auto c = model_flags_json(f.model);
  c["windows"] = config.windows;
  c["trace_windows"] = config.trace_windows;
  c["tau"] = {{"min", f.tau_min}, {"max", f.tau_max}, {"step", f.tau_step}};
  c["scoring"] = f.reference ? "reference" : "kernel";
  write_manifest(dir, "evaluate", c, input_hash(f.model.dataset));

  for (const auto& note : report.notes) err << note << '\n';
  out << "omega_s\tfused_eer\n";
  for (const auto& w : report.windows) {
    const auto& e = w.variants[0].eer;
    out << fmt::format("{}\t{}\n", w.omega, e ? fmt::format("{:.4f}", e->eer) : std::string("NA"));
  }
  return kExitOk;
}

// ---- report --------------------------------------------------------------------

std::vector<std::vector<std::string>> read_table(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    rows.push_back(std::move(cols));
  }
  if (rows.empty()) throw std::runtime_error(fmt::format("{} is empty", path.string()));
  return rows;
}

int cmd_report(const std::string& report_dir, std::ostream& out) {
  const fs::path dir(report_dir);
  const auto eer = read_table(dir / "eer.tsv");
  const auto contrib = read_table(dir / "contributions.tsv");

  std::vector<std::string> variants;
  std::map<long, std::map<std::string, std::string>> grid;
  for (std::size_t i = 1; i < eer.size(); ++i) {
    const auto& r = eer[i];
    if (r.size() < 3) throw std::runtime_error("malformed eer.tsv");
    if (std::find(variants.begin(), variants.end(), r[1]) == variants.end()) variants.push_back(r[1]);
    grid[std::stol(r[0])][r[1]] = r[2];
  }
  std::map<long, std::map<std::string, std::string>> contributions;
  for (std::size_t i = 1; i < contrib.size(); ++i) {
    const auto& r = contrib[i];
    if (r.size() < 3) throw std::runtime_error("malformed contributions.tsv");
    contributions[std::stol(r[0])][r[1]] = r[2];
  }

  out << "EER by window (minutes)\n";
  out << fmt::format("{:>8}", "omega");
  for (const auto& v : variants) out << fmt::format(" {:>16}", v);
  out << '\n';
  for (const auto& [omega, row] : grid) {
    out << fmt::format("{:>8.1f}", static_cast<double>(omega) / 60.0);
    for (const auto& v : variants) {
      auto it = row.find(v);
      out << fmt::format(" {:>16}", it == row.end() ? "" : it->second);
    }
    out << '\n';
  }
  out << "\nContribution (E_i - E) / E_i\n";
  out << fmt::format("{:>8}", "omega");
  for (auto m : kAllModalities) out << fmt::format(" {:>10}", to_string(m));
  out << '\n';
  for (const auto& [omega, row] : contributions) {
    out << fmt::format("{:>8.1f}", static_cast<double>(omega) / 60.0);
    for (auto m : kAllModalities) {
      auto it = row.find(std::string(to_string(m)));
      out << fmt::format(" {:>10}", it == row.end() ? "" : it->second);
    }
    out << '\n';
  }
  return kExitOk;
}

}  // namespace

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot read {}", path));
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Active authentication from text, app, web and location activity"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  GenerateFlags gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic population event log");
  g->add_option("--users", gen.users, "Number of users")->capture_default_str();
  g->add_option("--hours", gen.hours, "Active hours per user")->capture_default_str();
  g->add_option("--seed", gen.seed, "Global seed")->capture_default_str();
  g->add_option("--overlap", gen.overlap, "Behavior overlap between users in [0, 1]")->capture_default_str();
  g->add_option("--rate-dispersion", gen.rate_dispersion, "Sigma of per-user lognormal rate multipliers")
      ->capture_default_str();
  g->add_option("--out", gen.out, "Output directory")->required();

  TrainFlags tr;
  auto* t = app.add_subcommand("train", "Train every user's detectors on one experiment's training folds");
  add_model_flags(t, tr.model);
  t->add_option("--experiment", tr.experiment, "Experiment 1..5 of the fold rotation")->capture_default_str();
  t->add_option("--model-dir", tr.model_dir, "Directory for the model files")->required();

  CharacterizeFlags ch;
  auto* c = app.add_subcommand("characterize", "Estimate detector FAR/FRR on the characterization fold");
  c->add_option("--dataset", ch.dataset, "Event log")->required()->check(CLI::ExistingFile);
  c->add_option("--model-dir", ch.model_dir, "Directory written by train")->required()->check(CLI::ExistingDirectory);
  c->add_option("--out", ch.out, "Output directory (default: the model directory)");
  c->add_option("--windows", ch.windows, "Window sizes in seconds")->delimiter(',')->capture_default_str();
  c->add_option("--jobs", ch.jobs, "Worker threads (0: all cores)")->capture_default_str();

  EvaluateFlags ev;
  auto* e = app.add_subcommand("evaluate", "Run the five-experiment rotation and write the report tables");
  add_model_flags(e, ev.model);
  e->add_option("--out", ev.out, "Report directory")->required();
  e->add_option("--windows", ev.windows, "Window sizes in seconds")->delimiter(',')->capture_default_str();
  e->add_option("--trace-windows", ev.trace_windows, "Window sizes whose decisions are traced")
      ->delimiter(',')
      ->capture_default_str();
  e->add_option("--tau-min", ev.tau_min, "Lowest a0 of the sweep")->capture_default_str();
  e->add_option("--tau-max", ev.tau_max, "Highest a0 of the sweep")->capture_default_str();
  e->add_option("--tau-step", ev.tau_step, "Sweep step")->capture_default_str();
  e->add_flag("--reference", ev.reference, "Score windows with the direct per-window classifiers");

  std::string report_dir;
  auto* r = app.add_subcommand("report", "Print the EER and contribution tables of a report directory");
  r->add_option("--report-dir", report_dir, "Directory written by evaluate")->required()->check(CLI::ExistingDirectory);

  for (auto* sub : {g, t, c, e, r}) bind_env(*sub);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitBadConfig;
  }

  try {
    if (*g) return cmd_generate(gen, out);
    if (*t) return cmd_train(tr, out, err);
    if (*c) return cmd_characterize(ch, out, err);
    if (*e) return cmd_evaluate(ev, out, err);
    if (*r) return cmd_report(report_dir, out);
  } catch (const BadConfig& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitBadConfig;
  } catch (const std::invalid_argument& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitBadConfig;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitFailure;
  }
  return kExitBadConfig;
}

}  // namespace actauth::cli
