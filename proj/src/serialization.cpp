#include "itl/serialization.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <zlib.h>

namespace itl {

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

Json transitions_to_json(const TransitionTensor& t) {
    Json out = Json::array();
    for (StateIndex s = 0; s < t.n_states(); ++s) {
        Json per_action = Json::array();
        for (ActionIndex a = 0; a < t.n_actions(); ++a) {
            const auto row = t.row(s, a);
            per_action.push_back(std::vector<double>(row.begin(), row.end()));
        }
        out.push_back(std::move(per_action));
    }
    return out;
}

TransitionTensor transitions_from_json(const Json& nested, std::size_t n_states, std::size_t n_actions) {
    require(nested.is_array() && nested.size() == n_states, "transitions must have n_states rows");
    TransitionTensor t(n_states, n_actions);
    for (StateIndex s = 0; s < n_states; ++s) {
        require(nested[s].is_array() && nested[s].size() == n_actions,
                "transitions[" + std::to_string(s) + "] must have n_actions entries");
        for (ActionIndex a = 0; a < n_actions; ++a) {
            const auto row = nested[s][a].get<std::vector<double>>();
            require(row.size() == n_states, "transition row length must equal n_states");
            std::copy(row.begin(), row.end(), t.row(s, a).begin());
        }
    }
    return t;
}

Json mdp_to_json(const TabularMdp& mdp) {
    Json rewards = Json::array();
    for (StateIndex s = 0; s < mdp.n_states(); ++s) {
        const auto row = mdp.rewards().row(s);
        rewards.push_back(std::vector<double>(row.begin(), row.end()));
    }
    return Json{{"n_states", mdp.n_states()},
                {"n_actions", mdp.n_actions()},
                {"discount", mdp.discount()},
                {"terminal", mdp.terminal()},
                {"transitions", transitions_to_json(mdp.transitions())},
                {"rewards", std::move(rewards)}};
}

TabularMdp mdp_from_json(const Json& doc) {
    try {
        const auto n_states = doc.at("n_states").get<std::size_t>();
        const auto n_actions = doc.at("n_actions").get<std::size_t>();
        TransitionTensor t = transitions_from_json(doc.at("transitions"), n_states, n_actions);
        const Json& r = doc.at("rewards");
        require(r.is_array() && r.size() == n_states, "rewards must have n_states rows");
        RewardTable rewards(n_states, n_actions);
        for (StateIndex s = 0; s < n_states; ++s) {
            const auto row = r[s].get<std::vector<double>>();
            require(row.size() == n_actions, "reward row length must equal n_actions");
            std::copy(row.begin(), row.end(), rewards.row(s).begin());
        }
        return TabularMdp(std::move(t), std::move(rewards), doc.at("discount").get<double>(),
                          doc.at("terminal").get<std::size_t>());
    } catch (const Json::exception& e) {
        throw ContractViolation(std::string("malformed MDP document: ") + e.what());
    }
}

void save_mdp(const TabularMdp& mdp, const std::filesystem::path& path) {
    write_text_file(path, mdp_to_json(mdp).dump(1) + "\n");
}

TabularMdp load_mdp(const std::filesystem::path& path) { return mdp_from_json(read_json_file(path)); }

std::string env_hash(const TabularMdp& mdp) { return hex64(fnv1a64(mdp_to_json(mdp).dump())); }

Json batch_to_json(const TrajectoryBatch& batch, const BatchMetadata& meta) {
    Json trajectories = Json::array();
    for (const auto& traj : batch.trajectories()) {
        Json steps = Json::array();
        for (const auto& st : traj.steps) steps.push_back(Json::array({st.state, st.action, st.reward, st.next_state}));
        trajectories.push_back(std::move(steps));
    }
    return Json{{"format", "itl-batch/1"},
                {"env_hash", meta.env_hash},
                {"seed", meta.seed},
                {"episodes", meta.episodes},
                {"horizon", meta.horizon},
                {"expert_epsilon", meta.expert_epsilon},
                {"n_states", batch.n_states()},
                {"n_actions", batch.n_actions()},
                {"terminal", batch.terminal()},
                {"trajectories", std::move(trajectories)}};
}

BatchFile batch_from_json(const Json& doc) {
    try {
        BatchMetadata meta;
        meta.env_hash = doc.at("env_hash").get<std::string>();
        meta.seed = doc.at("seed").get<std::uint64_t>();
        meta.episodes = doc.at("episodes").get<int>();
        meta.horizon = doc.at("horizon").get<int>();
        meta.expert_epsilon = doc.at("expert_epsilon").get<double>();
        std::vector<Trajectory> trajectories;
        for (const auto& steps : doc.at("trajectories")) {
            Trajectory traj;
            for (const auto& st : steps) {
                require(st.is_array() && st.size() == 4, "each step must be [s, a, r, s']");
                traj.steps.push_back(Step{st[0].get<StateIndex>(), st[1].get<ActionIndex>(),
                                          st[2].get<double>(), st[3].get<StateIndex>()});
            }
            trajectories.push_back(std::move(traj));
        }
        TrajectoryBatch batch(doc.at("n_states").get<std::size_t>(), doc.at("n_actions").get<std::size_t>(),
                              doc.at("terminal").get<std::size_t>(), std::move(trajectories));
        return BatchFile{std::move(batch), std::move(meta)};
    } catch (const Json::exception& e) {
        throw ContractViolation(std::string("malformed batch document: ") + e.what());
    }
}

void save_batch(const TrajectoryBatch& batch, const BatchMetadata& meta,
                const std::filesystem::path& path) {
    write_text_file(path, batch_to_json(batch, meta).dump() + "\n");
}

BatchFile load_batch(const std::filesystem::path& path) { return batch_from_json(read_json_file(path)); }

namespace {

Json table_to_json(const auto& table) {
    Json out = Json::array();
    for (StateIndex s = 0; s < table.n_states(); ++s) {
        const auto row = table.row(s);
        out.push_back(std::vector<double>(row.begin(), row.end()));
    }
    return out;
}

} // namespace

Json sample_set_to_json(const ItlSampleSet& set, bool include_samples) {
    Json out{{"accepted", set.accepted},
             {"outer_rounds_used", set.outer_rounds_used},
             {"final_deltas",
              {{"gap", table_to_json(set.final_deltas.gap)}, {"window", table_to_json(set.final_deltas.window)}}},
             {"per_row_draw_counts", table_to_json(set.per_row_draw_counts)}};
    if (include_samples) {
        Json samples = Json::array();
        for (const auto& t : set.samples) samples.push_back(transitions_to_json(t));
        out["samples"] = std::move(samples);
    }
    return out;
}

Json env_spec_to_json(const EnvSpec& spec) {
    return Json{{"n_decision_states", spec.n_decision_states},
                {"n_actions", spec.n_actions},
                {"discount", spec.discount},
                {"skew_mix", spec.skew_mix},
                {"skew_concentration", spec.skew_concentration},
                {"flat_concentration", spec.flat_concentration},
                {"reward_low", spec.reward_low},
                {"reward_high", spec.effective_reward_high()},
                {"reward_dependence",
                 spec.reward_dependence == RewardDependence::StateAction ? "state-action" : "action"},
                {"seed", spec.seed}};
}

namespace {

void reject_unknown_keys(const Json& doc, const std::set<std::string>& known, const std::string& where) {
    require(doc.is_object(), where + " must be a JSON object");
    for (const auto& [key, value] : doc.items())
        if (!known.contains(key)) throw ContractViolation("unknown key '" + key + "' in " + where);
}

template <class T>
void read_optional(const Json& doc, const char* key, T& out) {
    if (doc.contains(key) && !doc.at(key).is_null()) out = doc.at(key).get<T>();
}

} // namespace

EnvSpec env_spec_from_json(const Json& doc) {
    reject_unknown_keys(doc,
                        {"n_decision_states", "n_actions", "discount", "skew_mix", "skew_concentration",
                         "flat_concentration", "reward_low", "reward_high", "reward_dependence", "seed"},
                        "env spec");
    EnvSpec spec;
    try {
        read_optional(doc, "n_decision_states", spec.n_decision_states);
        read_optional(doc, "n_actions", spec.n_actions);
        read_optional(doc, "discount", spec.discount);
        read_optional(doc, "skew_mix", spec.skew_mix);
        read_optional(doc, "skew_concentration", spec.skew_concentration);
        read_optional(doc, "flat_concentration", spec.flat_concentration);
        read_optional(doc, "reward_low", spec.reward_low);
        if (doc.contains("reward_high") && !doc.at("reward_high").is_null())
            spec.reward_high = doc.at("reward_high").get<double>();
        if (doc.contains("reward_dependence")) {
            const auto dep = doc.at("reward_dependence").get<std::string>();
            if (dep == "state-action")
                spec.reward_dependence = RewardDependence::StateAction;
            else if (dep == "action")
                spec.reward_dependence = RewardDependence::ActionOnly;
            else
                throw ContractViolation("reward_dependence must be 'state-action' or 'action'");
        }
        read_optional(doc, "seed", spec.seed);
    } catch (const Json::exception& e) {
        throw ContractViolation(std::string("malformed env spec: ") + e.what());
    }
    spec.validate();
    return spec;
}

namespace {

std::string format_key(double eps) {
    std::ostringstream os;
    os << eps;
    return os.str();
}

Json targets_to_json(const std::map<double, int>& targets) {
    Json out = Json::object();
    for (const auto& [eps, count] : targets) out[format_key(eps)] = count;
    return out;
}

std::map<double, int> targets_from_json(const Json& doc) {
    std::map<double, int> out;
    for (const auto& [key, value] : doc.items()) out[std::stod(key)] = value.get<int>();
    return out;
}

} // namespace

Json config_to_json(const ExperimentConfig& config) {
    Json env;
    if (config.env.path) {
        env = Json{{"path", *config.env.path}};
    } else {
        env = Json{{"generate", env_spec_to_json(config.env.spec)},
                   {"targets", targets_to_json(config.env.targets)},
                   {"max_tries", config.env.max_tries}};
    }
    Json methods = Json::array();
    for (Method m : config.methods) methods.push_back(to_string(m));
    const auto& s = config.sampler;
    Json sampler{{"max_row_draws", s.limits.max_row_draws},
                 {"max_outer_rounds", s.limits.max_outer_rounds},
                 {"gap_factor", s.tuning.gap_factor},
                 {"window_factor", s.tuning.window_factor},
                 {"zero_gap_floor", s.tuning.zero_gap_floor},
                 {"ball_source", to_string(s.ball_source)},
                 {"equality_mode", s.equality_mode == EqualityMode::Pin ? "pin" : "tolerance"},
                 {"equality_tolerance", s.equality_tolerance ? Json(*s.equality_tolerance) : Json(nullptr)},
                 {"require_expert_margin", s.require_expert_margin}};
    return Json{{"env", std::move(env)},
                {"epsilons", config.epsilons},
                {"episode_counts", config.episode_counts},
                {"n_datasets", config.n_datasets},
                {"n_posterior_samples", config.n_posterior_samples},
                {"horizon", config.horizon},
                {"master_seed", config.master_seed},
                {"methods", std::move(methods)},
                {"anchor", to_string(config.anchor)},
                {"sampler", std::move(sampler)},
                {"max_flagged_fraction", config.max_flagged_fraction}};
}

ExperimentConfig config_from_json(const Json& doc) {
    reject_unknown_keys(doc,
                        {"env", "epsilons", "episode_counts", "n_datasets", "n_posterior_samples", "horizon",
                         "master_seed", "methods", "anchor", "sampler", "max_flagged_fraction", "output_dir"},
                        "experiment config");
    ExperimentConfig config;
    try {
        if (doc.contains("env")) {
            const Json& env = doc.at("env");
            reject_unknown_keys(env, {"path", "generate", "targets", "max_tries"}, "env");
            if (env.contains("path")) {
                config.env.path = env.at("path").get<std::string>();
            } else {
                if (env.contains("generate")) config.env.spec = env_spec_from_json(env.at("generate"));
                if (env.contains("targets")) config.env.targets = targets_from_json(env.at("targets"));
                read_optional(env, "max_tries", config.env.max_tries);
            }
        } else {
            config.env.spec.seed = kReferenceEnvSeed;
        }
        read_optional(doc, "epsilons", config.epsilons);
        read_optional(doc, "episode_counts", config.episode_counts);
        read_optional(doc, "n_datasets", config.n_datasets);
        read_optional(doc, "n_posterior_samples", config.n_posterior_samples);
        read_optional(doc, "horizon", config.horizon);
        read_optional(doc, "master_seed", config.master_seed);
        read_optional(doc, "max_flagged_fraction", config.max_flagged_fraction);
        if (doc.contains("methods")) {
            config.methods.clear();
            for (const auto& m : doc.at("methods")) config.methods.push_back(parse_method(m.get<std::string>()));
        }
        if (doc.contains("anchor")) config.anchor = parse_anchor_mode(doc.at("anchor").get<std::string>());
        if (doc.contains("sampler")) {
            const Json& s = doc.at("sampler");
            reject_unknown_keys(s,
                                {"max_row_draws", "max_outer_rounds", "gap_factor", "window_factor",
                                 "zero_gap_floor", "ball_source", "equality_mode", "equality_tolerance",
                                 "require_expert_margin"},
                                "sampler");
            auto& o = config.sampler;
            read_optional(s, "max_row_draws", o.limits.max_row_draws);
            read_optional(s, "max_outer_rounds", o.limits.max_outer_rounds);
            read_optional(s, "gap_factor", o.tuning.gap_factor);
            read_optional(s, "window_factor", o.tuning.window_factor);
            read_optional(s, "zero_gap_floor", o.tuning.zero_gap_floor);
            read_optional(s, "require_expert_margin", o.require_expert_margin);
            if (s.contains("ball_source")) o.ball_source = parse_ball_source(s.at("ball_source").get<std::string>());
            if (s.contains("equality_mode")) {
                const auto mode = s.at("equality_mode").get<std::string>();
                if (mode == "pin")
                    o.equality_mode = EqualityMode::Pin;
                else if (mode == "tolerance")
                    o.equality_mode = EqualityMode::Tolerance;
                else
                    throw ContractViolation("equality_mode must be 'pin' or 'tolerance'");
            }
            if (s.contains("equality_tolerance") && !s.at("equality_tolerance").is_null())
                o.equality_tolerance = s.at("equality_tolerance").get<double>();
        }
    } catch (const Json::exception& e) {
        throw ContractViolation(std::string("malformed experiment config: ") + e.what());
    }
    config.validate();
    return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    return config_from_json(read_json_file(path));
}

std::string config_hash(const ExperimentConfig& config) {
    return hex64(fnv1a64(config_to_json(config).dump()));
}

void write_text_file(const std::filesystem::path& path, const std::string& text, bool compress) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    if (compress) {
        gzFile f = gzopen(path.c_str(), "wb9");
        if (!f) throw IoError("cannot open " + path.string() + " for writing");
        const int written = gzwrite(f, text.data(), static_cast<unsigned>(text.size()));
        const int closed = gzclose(f);
        if (written != static_cast<int>(text.size()) || closed != Z_OK)
            throw IoError("failed writing " + path.string());
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
    // gzread passes uncompressed files through unchanged
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open " + path.string());
    std::string out;
    char buf[1 << 16];
    int n = 0;
    while ((n = gzread(f, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(n));
    const bool failed = n < 0;
    gzclose(f);
    if (failed) throw IoError("failed reading " + path.string());
    return out;
}

Json read_json_file(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ContractViolation("invalid JSON in " + path.string() + ": " + e.what());
    }
}

std::map<double, int> parse_targets(const std::string& text) {
    std::map<double, int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto colon = item.find(':');
        require(colon != std::string::npos, "target '" + item + "' must look like eps:count");
        try {
            out[std::stod(item.substr(0, colon))] = std::stoi(item.substr(colon + 1));
        } catch (const std::exception&) {
            throw ContractViolation("target '" + item + "' must look like eps:count");
        }
    }
    return out;
}

} // namespace itl
