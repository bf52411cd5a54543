#pragma once

#include <filesystem>
#include <string>

#include "ohs/env.hpp"
#include "ohs/fqe.hpp"
#include "ohs/nn.hpp"
#include "ohs/train.hpp"

namespace ohs {

// Dataset binary format "OHSD": header {magic, version u32, obs_dim u32,
// act_dim u32, episode_count u32}, then per episode {episode_id u32,
// length u32} followed by its transitions; each transition is obs, action,
// reward, next_obs as little-endian f32 plus one terminal byte.
inline constexpr std::uint32_t kDatasetFormatVersion = 1;

void save_dataset(const std::filesystem::path& path, const Dataset& dataset);
// env_spec supplies name/horizon/bounds; dims are validated against the header.
Dataset load_dataset(const std::filesystem::path& path, const EnvSpec& env_spec);

// Weight file "OHSW": header {magic, version u32, input_dim u32,
// output_dim u32, hidden_size u32, num_blocks u32, param_count u32}, then
// little-endian f32 parameters in declared segment order.
inline constexpr std::uint32_t kWeightsFormatVersion = 1;

void save_weights(const std::filesystem::path& path, const nn::MlpParams& params);
nn::MlpParams load_weights(const std::filesystem::path& path);

// PolicyArtifact on disk: manifest.json plus policy.ohsw and critic.ohsw in
// one directory.
struct StoredArtifact {
    PolicyArtifact artifact;
    std::string env_name;
};

void save_artifact(const std::filesystem::path& dir, const PolicyArtifact& artifact,
                   const std::string& env_name);
StoredArtifact load_artifact(const std::filesystem::path& dir);

// FqeCritic on disk: manifest.json plus critic.ohsw; step-sweep snapshots are
// stored alongside as critic_step<k>.ohsw.
void save_fqe_critic(const std::filesystem::path& dir, const FqeCritic& critic);
FqeCritic load_fqe_critic(const std::filesystem::path& dir);
FqeCritic load_fqe_checkpoint(const std::filesystem::path& dir, std::int64_t checkpoint);

}  // namespace ohs
