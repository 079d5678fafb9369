#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hjlab/artifacts.hpp"
#include "hjlab/core.hpp"

#ifndef HJLAB_VERSION
#define HJLAB_VERSION "unversioned"
#endif

namespace hjlab {

inline constexpr char const* kManifestName = "manifest.json";
inline constexpr int kManifestFormatVersion = 1;

//! One acceptance check of a run. A failed check gives exit status 2.
struct CheckResult {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
  //! Relation that must hold between value and threshold, e.g. "<=".
  std::string relation;
};

struct ArtifactRecord {
  std::string name;
  std::string sha256;
  std::uint64_t bytes = 0;
};

enum class RunOutcome { kOk, kCheckFailed, kError };

inline char const* OutcomeName(RunOutcome o) {
  switch (o) {
    case RunOutcome::kOk: return "ok";
    case RunOutcome::kCheckFailed: return "check_failed";
    case RunOutcome::kError: return "error";
  }
  return "error";
}

inline int ExitStatus(RunOutcome o) {
  return o == RunOutcome::kOk ? 0 : (o == RunOutcome::kCheckFailed ? 2 : 1);
}

//! Record of one run, written as manifest.json into the artifact
//! directory for every run that reached the directory, failed or not.
struct RunManifest {
  std::string subcommand;
  std::string config_text;
  std::string config_sha256;
  std::string code_version = HJLAB_VERSION;
  std::uint64_t master_seed = 0;
  int workers = 1;
  nlohmann::json seeds = nlohmann::json::object();
  nlohmann::json tolerances = nlohmann::json::object();
  //! Probability mass moved onto the cap by truncation, per variable.
  double truncation_tail_mass = 0.0;
  nlohmann::json overrides = nlohmann::json::array();
  nlohmann::json summary = nlohmann::json::object();
  std::vector<CheckResult> checks;
  std::vector<ArtifactRecord> artifacts;
  double wall_clock_seconds = 0.0;
  RunOutcome outcome = RunOutcome::kOk;
  std::string error;

  void AddCheck(std::string name, double value, std::string relation, double threshold) {
    bool pass = false;
    if (relation == "<=") pass = value <= threshold;
    else if (relation == ">=") pass = value >= threshold;
    else if (relation == "==") pass = value == threshold;
    else throw InvalidGeometry(Msg("unknown check relation '", relation, "'"));
    checks.push_back({std::move(name), pass, value, threshold, std::move(relation)});
  }

  bool AllChecksPass() const {
    for (auto const& c : checks) {
      if (!c.pass) return false;
    }
    return true;
  }

  nlohmann::json ToJson() const {
    auto j = nlohmann::json::object();
    j["format_version"] = kManifestFormatVersion;
    j["code_version"] = code_version;
    j["subcommand"] = subcommand;
    j["config_sha256"] = config_sha256;
    j["config"] = config_text;
    j["master_seed"] = master_seed;
    j["workers"] = workers;
    j["seeds"] = seeds;
    j["tolerances"] = tolerances;
    j["truncation_tail_mass"] = truncation_tail_mass;
    j["overrides"] = overrides;
    j["summary"] = summary;
    auto checks_j = nlohmann::json::array();
    for (auto const& c : checks) {
      checks_j.push_back({{"name", c.name}, {"pass", c.pass}, {"value", c.value},
                          {"relation", c.relation}, {"threshold", c.threshold}});
    }
    j["checks"] = checks_j;
    auto arts = nlohmann::json::array();
    for (auto const& a : artifacts) {
      arts.push_back({{"name", a.name}, {"sha256", a.sha256}, {"bytes", a.bytes}});
    }
    j["artifacts"] = arts;
    j["wall_clock_seconds"] = wall_clock_seconds;
    j["outcome"] = OutcomeName(outcome);
    j["error"] = error;
    return j;
  }
};

//! Artifact directory holding exactly one manifest plus the files it
//! lists. Opening a directory left by an earlier run removes the files
//! that run's manifest listed; any other file makes the directory
//! unusable, so a manifest never sits next to files it does not cover.
class ArtifactDir {
 public:
  explicit ArtifactDir(std::filesystem::path dir) : dir_(std::move(dir)) {
    namespace fs = std::filesystem;
    fs::create_directories(dir_);
    auto const manifest = dir_ / kManifestName;
    if (fs::exists(manifest)) {
      auto old = nlohmann::json();
      try {
        old = nlohmann::json::parse(ReadFileBytes(manifest));
      } catch (nlohmann::json::exception const& e) {
        throw ConfigError(Msg("existing manifest ", manifest.string(), " is unreadable: ", e.what()));
      }
      for (auto const& a : old.value("artifacts", nlohmann::json::array())) {
        auto const name = a.value("name", std::string());
        if (IsPlainName(name)) fs::remove(dir_ / name);
      }
      fs::remove(manifest);
    }
    for (auto const& entry : fs::directory_iterator(dir_)) {
      throw ConfigError(Msg("output directory ", dir_.string(),
                            " contains files not listed by a manifest (",
                            entry.path().filename().string(), ")"));
    }
  }

  std::filesystem::path const& path() const { return dir_; }

  //! Writes one artifact and records its hash.
  void Write(std::string const& name, std::string_view bytes) {
    if (!IsPlainName(name) || name == kManifestName) {
      throw InvalidGeometry(Msg("invalid artifact name '", name, "'"));
    }
    if (!names_.insert(name).second) {
      throw InvalidGeometry(Msg("artifact '", name, "' written twice"));
    }
    WriteFileBytes(dir_ / name, bytes);
    records_.push_back({name, Sha256Hex(bytes), bytes.size()});
  }

  std::vector<ArtifactRecord> const& records() const { return records_; }

  //! Writes manifest.json listing every artifact written so far.
  void WriteManifest(RunManifest m) const {
    m.artifacts = records_;
    WriteFileBytes(dir_ / kManifestName, m.ToJson().dump(2) + "\n");
  }

 private:
  static bool IsPlainName(std::string const& name) {
    return !name.empty() && name != "." && name != ".." &&
           name.find_first_of("/\\") == std::string::npos;
  }

  std::filesystem::path dir_;
  std::vector<ArtifactRecord> records_;
  std::set<std::string> names_;
};

//! Checks manifest completeness: the directory holds exactly the
//! manifest and the artifacts it lists, each with a matching hash.
//! Returns an empty string on success and a description otherwise.
inline std::string CheckManifest(std::filesystem::path const& dir) {
  namespace fs = std::filesystem;
  auto const manifest = dir / kManifestName;
  if (!fs::exists(manifest)) return "no manifest";
  auto const j = nlohmann::json::parse(ReadFileBytes(manifest));
  auto listed = std::set<std::string>();
  for (auto const& a : j.at("artifacts")) {
    auto const name = a.at("name").get<std::string>();
    listed.insert(name);
    if (!fs::exists(dir / name)) return Msg("listed artifact ", name, " is missing");
    if (Sha256Hex(ReadFileBytes(dir / name)) != a.at("sha256").get<std::string>()) {
      return Msg("hash mismatch for ", name);
    }
  }
  for (auto const& entry : fs::directory_iterator(dir)) {
    auto const name = entry.path().filename().string();
    if (name != kManifestName && listed.count(name) == 0) {
      return Msg("unlisted file ", name);
    }
  }
  return {};
}

}  // namespace hjlab
