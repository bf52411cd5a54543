#include "ohs/io.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "ohs/errors.hpp"

namespace ohs {

using nlohmann::json;

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw IoError("unexpected end of file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& os, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(os, bits);
}

float get_f32(std::istream& is) {
    std::uint32_t bits = get_u32(is);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path.string() + "' for reading");
    return is;
}

void expect_magic(std::istream& is, const char expected[4], const std::string& what) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, expected, 4) != 0)
        throw IoError("not a " + what + " file (bad magic)");
}

}  // namespace

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
    auto os = open_out(path);
    os.write("OHSD", 4);
    put_u32(os, kDatasetFormatVersion);
    put_u32(os, static_cast<std::uint32_t>(dataset.env_spec.obs_dim));
    put_u32(os, static_cast<std::uint32_t>(dataset.env_spec.act_dim));
    put_u32(os, static_cast<std::uint32_t>(dataset.episodes.size()));
    for (const auto& ep : dataset.episodes) {
        put_u32(os, static_cast<std::uint32_t>(ep.front().episode_id));
        put_u32(os, static_cast<std::uint32_t>(ep.size()));
        for (const auto& t : ep) {
            for (float v : t.obs) put_f32(os, v);
            for (float v : t.action) put_f32(os, v);
            put_f32(os, t.reward);
            for (float v : t.next_obs) put_f32(os, v);
            os.put(t.terminal ? 1 : 0);
        }
    }
    if (!os) throw IoError("write failed for '" + path.string() + "'");
}

Dataset load_dataset(const std::filesystem::path& path, const EnvSpec& env_spec) {
    auto is = open_in(path);
    expect_magic(is, "OHSD", "dataset");
    const std::uint32_t version = get_u32(is);
    if (version != kDatasetFormatVersion)
        throw IoError("unsupported dataset format version " + std::to_string(version));
    const auto obs_dim = get_u32(is);
    const auto act_dim = get_u32(is);
    if (obs_dim != static_cast<std::uint32_t>(env_spec.obs_dim) ||
        act_dim != static_cast<std::uint32_t>(env_spec.act_dim))
        throw IoError("dataset dimensions do not match environment '" + env_spec.name + "'");
    const auto n_episodes = get_u32(is);

    Dataset ds;
    ds.env_spec = env_spec;
    ds.episodes.reserve(n_episodes);
    for (std::uint32_t e = 0; e < n_episodes; ++e) {
        const auto episode_id = static_cast<std::int32_t>(get_u32(is));
        const auto length = get_u32(is);
        Episode ep;
        ep.reserve(length);
        for (std::uint32_t i = 0; i < length; ++i) {
            Transition t;
            t.obs.resize(obs_dim);
            for (auto& v : t.obs) v = get_f32(is);
            t.action.resize(act_dim);
            for (auto& v : t.action) v = get_f32(is);
            t.reward = get_f32(is);
            t.next_obs.resize(obs_dim);
            for (auto& v : t.next_obs) v = get_f32(is);
            int c = is.get();
            if (c == std::char_traits<char>::eof()) throw IoError("unexpected end of file");
            t.terminal = c != 0;
            t.episode_id = episode_id;
            t.step = static_cast<std::int32_t>(i);
            ep.push_back(std::move(t));
        }
        ds.episodes.push_back(std::move(ep));
    }
    return ds;
}

void save_weights(const std::filesystem::path& path, const nn::MlpParams& params) {
    auto os = open_out(path);
    os.write("OHSW", 4);
    put_u32(os, kWeightsFormatVersion);
    put_u32(os, static_cast<std::uint32_t>(params.shape.input_dim));
    put_u32(os, static_cast<std::uint32_t>(params.shape.output_dim));
    put_u32(os, static_cast<std::uint32_t>(params.shape.hidden_size));
    put_u32(os, static_cast<std::uint32_t>(params.shape.num_blocks));
    put_u32(os, static_cast<std::uint32_t>(params.data.size()));
    for (float v : params.data) put_f32(os, v);
    if (!os) throw IoError("write failed for '" + path.string() + "'");
}

nn::MlpParams load_weights(const std::filesystem::path& path) {
    auto is = open_in(path);
    expect_magic(is, "OHSW", "weights");
    const std::uint32_t version = get_u32(is);
    if (version != kWeightsFormatVersion)
        throw IoError("unsupported weights format version " + std::to_string(version));
    nn::MlpShape shape;
    shape.input_dim = static_cast<int>(get_u32(is));
    shape.output_dim = static_cast<int>(get_u32(is));
    shape.hidden_size = static_cast<int>(get_u32(is));
    shape.num_blocks = static_cast<int>(get_u32(is));
    const auto count = get_u32(is);
    if (count != shape.param_count())
        throw IoError("weights file param count does not match its shape");
    nn::MlpParams params(shape);
    for (auto& v : params.data) v = get_f32(is);
    return params;
}

namespace {

json setting_to_json(const HyperparameterSetting& s) {
    json j{{"algorithm", to_string(s.algorithm)},
           {"hidden_size", s.hidden_size},
           {"num_blocks", s.num_blocks},
           {"learning_rate", s.learning_rate},
           {"learner_steps", s.learner_steps},
           {"seed", s.seed}};
    if (s.beta) j["beta"] = *s.beta;
    return j;
}

HyperparameterSetting setting_from_json(const json& j) {
    HyperparameterSetting s;
    s.algorithm = algorithm_from_string(j.at("algorithm").get<std::string>());
    s.hidden_size = j.at("hidden_size").get<int>();
    s.num_blocks = j.at("num_blocks").get<int>();
    s.learning_rate = j.at("learning_rate").get<double>();
    s.learner_steps = j.at("learner_steps").get<std::int64_t>();
    s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("beta")) s.beta = j.at("beta").get<double>();
    return s;
}

json grid_to_json(const AtomGrid& g) {
    return json{{"v_min", g.v_min}, {"v_max", g.v_max}, {"n_atoms", g.n_atoms}};
}

AtomGrid grid_from_json(const json& j) {
    return AtomGrid{j.at("v_min").get<double>(), j.at("v_max").get<double>(),
                    j.at("n_atoms").get<int>()};
}

json load_json(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open '" + path.string() + "'");
    json j;
    try {
        is >> j;
    } catch (const json::parse_error& e) {
        throw IoError("malformed JSON in '" + path.string() + "': " + e.what());
    }
    return j;
}

void store_json(const std::filesystem::path& path, const json& j) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    os << j.dump(2) << "\n";
}

}  // namespace

void save_artifact(const std::filesystem::path& dir, const PolicyArtifact& artifact,
                   const std::string& env_name) {
    std::filesystem::create_directories(dir);
    save_weights(dir / "policy.ohsw", artifact.policy_params);
    save_weights(dir / "critic.ohsw", artifact.orl_critic_params);
    json j{{"format_version", 1},
           {"policy_id", artifact.policy_id},
           {"env", env_name},
           {"setting", setting_to_json(artifact.setting)},
           {"grid", grid_to_json(artifact.grid)},
           {"log_std", artifact.policy_log_std},
           {"failed", artifact.failed}};
    if (!artifact.critic_losses.empty()) j["final_critic_loss"] = artifact.critic_losses.back();
    if (!artifact.policy_losses.empty()) j["final_policy_loss"] = artifact.policy_losses.back();
    store_json(dir / "manifest.json", j);
}

StoredArtifact load_artifact(const std::filesystem::path& dir) {
    json j = load_json(dir / "manifest.json");
    StoredArtifact out;
    out.env_name = j.at("env").get<std::string>();
    out.artifact.policy_id = j.at("policy_id").get<std::string>();
    out.artifact.setting = setting_from_json(j.at("setting"));
    out.artifact.grid = grid_from_json(j.at("grid"));
    out.artifact.policy_log_std = j.at("log_std").get<std::vector<float>>();
    out.artifact.failed = j.at("failed").get<bool>();
    out.artifact.policy_params = load_weights(dir / "policy.ohsw");
    out.artifact.orl_critic_params = load_weights(dir / "critic.ohsw");
    return out;
}

void save_fqe_critic(const std::filesystem::path& dir, const FqeCritic& critic) {
    std::filesystem::create_directories(dir);
    save_weights(dir / "critic.ohsw", critic.critic_params);
    json j{{"format_version", 1},
           {"evaluated_policy_ref", critic.evaluated_policy_ref},
           {"failed", critic.failed},
           {"config",
            {{"hidden_size", critic.config.hidden_size},
             {"num_blocks", critic.config.num_blocks},
             {"learning_rate", critic.config.learning_rate},
             {"learner_steps", critic.config.learner_steps},
             {"target_update_period", critic.config.target_update_period},
             {"gamma", critic.config.gamma},
             {"distributional", critic.config.distributional},
             {"seed", critic.config.seed},
             {"batch_size", critic.config.batch_size}}}};
    if (critic.grid) j["grid"] = grid_to_json(*critic.grid);
    if (!critic.loss_trace.empty()) j["final_loss"] = critic.loss_trace.back();
    store_json(dir / "manifest.json", j);
}

namespace {

FqeCritic load_fqe_manifest(const std::filesystem::path& dir) {
    json j = load_json(dir / "manifest.json");
    FqeCritic out;
    out.evaluated_policy_ref = j.at("evaluated_policy_ref").get<std::string>();
    out.failed = j.at("failed").get<bool>();
    const json& c = j.at("config");
    out.config.hidden_size = c.at("hidden_size").get<int>();
    out.config.num_blocks = c.at("num_blocks").get<int>();
    out.config.learning_rate = c.at("learning_rate").get<double>();
    out.config.learner_steps = c.at("learner_steps").get<std::int64_t>();
    out.config.target_update_period = c.at("target_update_period").get<int>();
    out.config.gamma = c.at("gamma").get<double>();
    out.config.distributional = c.at("distributional").get<bool>();
    out.config.seed = c.at("seed").get<std::uint64_t>();
    out.config.batch_size = c.at("batch_size").get<int>();
    if (j.contains("grid")) out.grid = grid_from_json(j.at("grid"));
    return out;
}

}  // namespace

FqeCritic load_fqe_critic(const std::filesystem::path& dir) {
    FqeCritic out = load_fqe_manifest(dir);
    out.critic_params = load_weights(dir / "critic.ohsw");
    return out;
}

FqeCritic load_fqe_checkpoint(const std::filesystem::path& dir, std::int64_t checkpoint) {
    FqeCritic out = load_fqe_manifest(dir);
    out.config.learner_steps = checkpoint;
    out.critic_params =
        load_weights(dir / ("critic_step" + std::to_string(checkpoint) + ".ohsw"));
    return out;
}

}  // namespace ohs
