#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "lfsim/ckat.hpp"
#include "lfsim/delivery.hpp"
#include "lfsim/netsim.hpp"
#include "lfsim/workload.hpp"

namespace lfsim::cli {

using nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

// Every key with its default. Unknown keys in user configs are rejected.
json default_config();

// Accepts a raw config or a run manifest (its "config" member is used).
json load_config_file(const std::filesystem::path& path);

// Deep-merges `patch` into `base`; throws ConfigError for keys the base lacks.
void merge_config(json& base, const json& patch, const std::string& where = "");

// Makes every path in the config absolute so manifests replay from any cwd.
void absolutize_paths(json& config);

std::string fnv1a_hex(std::string_view bytes);
std::string config_hash(const json& config);

struct Inputs {
    Catalog catalog;
    Trace trace;
    Topology topology;
};

Topology load_topology_config(const json& config);
GeneratorParams generator_params(const json& config);
RecDatasetParams planted_params(const json& config);
ClassifierConfig classifier_config(const json& config);
// workload.source: "files" (workload.dir or explicit paths), "generate" or "planted".
Inputs load_inputs(const json& config, std::uint64_t seed);
ScenarioConfig scenario_config(const json& config, Mode mode, std::uint64_t seed);
TrainConfig train_config(const json& config, std::uint64_t seed);
std::set<Source> selected_sources(const json& config);

// Writes `name` into dir and records its hash.
class OutputSet {
public:
    explicit OutputSet(std::filesystem::path dir);
    void write(const std::string& name, const std::string& content);
    const std::filesystem::path& dir() const { return dir_; }
    // manifest.json: command, effective config, its hash, seed, versions, output hashes.
    void write_manifest(const std::string& command, const json& config);

private:
    std::filesystem::path dir_;
    std::map<std::string, std::string> hashes_;
};

// Entry point shared by the executable and the tests. Returns the exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lfsim::cli
