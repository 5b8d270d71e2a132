#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>

#include "actauth/evaluation.hpp"

namespace actauth::eval {

namespace {

namespace fs = std::filesystem;

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

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt::format("{:.6f}", *v) : "NA"; }

}  // namespace

void write_report(const std::string& directory, const EvaluationReport& report) {
  const fs::path dir(directory);
  fs::create_directories(dir);

  std::string errors = "omega_s\tmodality\tfar_mean\tfar_std\tfrr_mean\tfrr_std\tusers\n";
  std::string roc = "omega_s\ta0\tfar\tfrr\n";
  std::string eer = "omega_s\tvariant\teer\tusers\n";
  std::string contrib = "omega_s\tmodality\tcontribution\n";
  for (const auto& w : report.windows) {
    for (const auto& me : w.modality_errors) {
      errors += fmt::format("{}\t{}\t{:.6f}\t{:.6f}\t{:.6f}\t{:.6f}\t{}\n", w.omega, to_string(me.modality), me.far_mean,
                            me.far_std, me.frr_mean, me.frr_std, me.users);
    }
    for (const auto& p : w.variants[0].roc) roc += fmt::format("{}\t{:.2f}\t{:.6f}\t{:.6f}\n", w.omega, p.a0, p.far, p.frr);
    for (const auto& v : w.variants) {
      eer += fmt::format("{}\t{}\t{}\t{}\n", w.omega, variant_name(v.variant),
                         fmt_opt(v.eer ? std::optional<double>(v.eer->eer) : std::nullopt), w.users_in_roc);
    }
    for (auto m : kAllModalities) {
      contrib += fmt::format("{}\t{}\t{}\n", w.omega, to_string(m), fmt_opt(w.contributions[index_of(m)]));
    }
  }

  std::string chars = "user\texperiment\tomega_s\tmodality\tfar\tfrr\tn_genuine\tn_impostor\ttheta\tin_fusion\n";
  for (const auto& u : report.users) {
    for (const auto& [omega, exps] : u.by_window) {
      for (int e = 0; e < kExperiments; ++e) {
        const auto& x = exps[static_cast<std::size_t>(e)];
        for (auto m : kAllModalities) {
          const auto k = index_of(m);
          const auto& c = x.characterization[k];
          chars += fmt::format("{}\t{}\t{}\t{}\t{:.6f}\t{:.6f}\t{}\t{}\t{}\t{}\n", u.user, e + 1, omega, to_string(m),
                               c.far, c.frr, c.n_genuine, c.n_impostor,
                               m == Modality::Text ? fmt::format("{:.6f}", x.theta[k]) : std::string("NA"),
                               x.in_fusion[k] ? 1 : 0);
        }
      }
    }
  }

  std::string traces = trace_header() + "\n";
  for (const auto& t : report.traces) traces += t + "\n";
  std::string notes;
  for (const auto& n : report.notes) notes += n + "\n";

  write_atomic(dir / "modality_errors.tsv", errors);
  write_atomic(dir / "roc.tsv", roc);
  write_atomic(dir / "eer.tsv", eer);
  write_atomic(dir / "contributions.tsv", contrib);
  write_atomic(dir / "characterization.tsv", chars);
  write_atomic(dir / "traces.tsv", traces);
  write_atomic(dir / "notes.txt", notes);
}

}  // namespace actauth::eval
