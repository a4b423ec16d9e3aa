#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "itl/data.hpp"
#include "itl/experiment.hpp"
#include "itl/itl_sampler.hpp"
#include "itl/mdp.hpp"

namespace itl {

using Json = nlohmann::json;

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

// MDP documents: n_states, n_actions, discount, terminal,
// transitions[s][a][s'], rewards[s][a].
Json mdp_to_json(const TabularMdp& mdp);
/// Re-validates every TabularMdp invariant.
TabularMdp mdp_from_json(const Json& doc);
void save_mdp(const TabularMdp& mdp, const std::filesystem::path& path);
TabularMdp load_mdp(const std::filesystem::path& path);

/// Hash of the canonical MDP document.
std::string env_hash(const TabularMdp& mdp);

Json transitions_to_json(const TransitionTensor& t);
TransitionTensor transitions_from_json(const Json& nested, std::size_t n_states, std::size_t n_actions);

struct BatchMetadata {
    std::string env_hash;
    std::uint64_t seed = 0;
    int episodes = 0;
    int horizon = kDefaultHorizon;
    double expert_epsilon = 0.0;
};

struct BatchFile {
    TrajectoryBatch batch;
    BatchMetadata meta;
};

/// Steps are stored as [s, a, r, s'] per trajectory; counts are not stored.
Json batch_to_json(const TrajectoryBatch& batch, const BatchMetadata& meta);
/// Counts are recomputed from the steps.
BatchFile batch_from_json(const Json& doc);
void save_batch(const TrajectoryBatch& batch, const BatchMetadata& meta,
                const std::filesystem::path& path);
BatchFile load_batch(const std::filesystem::path& path);

Json sample_set_to_json(const ItlSampleSet& set, bool include_samples);

Json env_spec_to_json(const EnvSpec& spec);
EnvSpec env_spec_from_json(const Json& doc);

Json config_to_json(const ExperimentConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const Json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_hash(const ExperimentConfig& config);

/// Writes `text`, gzip-compressed when `compress` is set. Throws IoError.
void write_text_file(const std::filesystem::path& path, const std::string& text, bool compress = false);
/// Reads plain or gzip-compressed text. Throws IoError.
std::string read_text_file(const std::filesystem::path& path);
Json read_json_file(const std::filesystem::path& path);

/// Parses "eps:count,eps:count".
std::map<double, int> parse_targets(const std::string& text);

} // namespace itl
