#include "rcsim/environment.hpp"

#include "rcsim/rng.hpp"

#include <algorithm>
#include <cmath>

namespace rcsim
{
    void EnvConfig::validate() const
    {
        auto bad = [](const std::string &msg) { throw EnvError(EnvError::Code::BadConfig, msg); };
        if (!(k_s > 0.0) || !std::isfinite(k_s))
            bad("window length K must be positive");
        if (episode_length < 1)
            bad("episode_length must be >= 1");
        if (fluctuation_period < 1)
            bad("fluctuation_period must be >= 1");
        if (!(fluctuation_lo > 0.0) || !(fluctuation_hi >= fluctuation_lo))
            bad("fluctuation range must satisfy 0 < lo <= hi");
    }

    double compute_reward(double thr, RewardNormalizer &norm)
    {
        norm.thr_min = std::min(norm.thr_min, thr);
        norm.thr_max = std::max(norm.thr_max, thr);
        const double span = norm.thr_max - norm.thr_min;
        if (!(span > 0.0))
        {
            return 0.5;
        }
        return std::clamp((thr - norm.thr_min) / span, 0.0, 1.0);
    }

    GraphObservation observe(const TopologySpec &spec, const MetricsWindow &window, const FeatureScale &scale)
    {
        GraphObservation obs;
        obs.node_ids = topological_order(spec);
        std::vector<std::size_t> position(spec.components.size());
        for (std::size_t i = 0; i < obs.node_ids.size(); ++i)
        {
            position[*spec.index_of(obs.node_ids[i])] = i;
            obs.node_kinds.push_back(spec.component(obs.node_ids[i]).kind);
            obs.node_features.push_back(node_features(window, obs.node_ids[i], scale));
        }
        for (const auto &l : spec.links)
        {
            obs.edges.emplace_back(position[*spec.index_of(l.from)], position[*spec.index_of(l.to)]);
            obs.edge_features.push_back(edge_features(l, scale));
        }
        return obs;
    }

    Environment::Environment(TopologySpec spec, EnvConfig config) : spec_(std::move(spec)), config_(config)
    {
        config_.validate();
        try
        {
            require_valid(spec_);
        }
        catch (const TopologyError &e)
        {
            throw EnvError(EnvError::Code::BadConfig, e.what());
        }
    }

    GraphObservation Environment::reset(std::optional<std::uint64_t> seed)
    {
        const std::uint64_t engine_seed = seed ? *seed : mix_seed(config_.seed, episodes_);
        ++episodes_;
        engine_ = std::make_unique<SimEngine>(spec_, engine_seed, config_.engine);
        collector_ = std::make_unique<WindowCollector>(*engine_);
        step_count_ = 0;

        engine_->advance(config_.k_s);
        auto window = collector_->collect(*engine_);
        last_info_ = report(window);
        return observe(spec_, window, config_.scale);
    }

    StepResult Environment::step(int action)
    {
        if (!engine_)
        {
            throw EnvError(EnvError::Code::BadState, "step before reset");
        }
        if (step_count_ >= config_.episode_length)
        {
            throw EnvError(EnvError::Code::BadState, "episode is done; reset required");
        }
        if (action < 0 || action >= kActionCount)
        {
            throw EnvError(EnvError::Code::BadAction, "action must be in 0..9, got " + std::to_string(action));
        }

        engine_->set_throttle(action_to_fraction(action));
        if (step_count_ % config_.fluctuation_period == 0)
        {
            engine_->resample_fluctuation(config_.fluctuation_lo, config_.fluctuation_hi);
        }
        engine_->advance(config_.k_s);
        auto window = collector_->collect(*engine_);

        StepResult out;
        out.info = report(window);
        out.reward = compute_reward(out.info.thr, normalizer_);
        out.observation = observe(spec_, window, config_.scale);
        ++step_count_;
        out.done = step_count_ == config_.episode_length;
        last_info_ = out.info;
        return out;
    }
} // namespace rcsim
