#pragma once

#include "rcsim/metrics.hpp"
#include "rcsim/simengine.hpp"
#include "rcsim/topology.hpp"

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rcsim
{
    inline constexpr int kActionCount = 10;

    struct EnvConfig
    {
        double k_s = 1.0;
        int episode_length = 512;
        int fluctuation_period = 100;
        double fluctuation_lo = 0.7;
        double fluctuation_hi = 1.3;
        std::uint64_t seed = 0;
        EngineConfig engine{};
        FeatureScale scale{};

        // Throws EnvError(BadConfig).
        void validate() const;
    };

    class EnvError : public std::runtime_error
    {
    public:
        enum class Code : std::uint8_t
        {
            BadAction,
            BadState,
            BadConfig,
        };

        EnvError(Code code, const std::string &what) : std::runtime_error(what), code_(code) {}
        Code code() const noexcept { return code_; }

    private:
        Code code_;
    };

    struct GraphObservation
    {
        std::vector<std::string> node_ids; // topological order
        std::vector<ComponentKind> node_kinds;
        std::vector<NodeFeatures> node_features;
        std::vector<std::pair<std::size_t, std::size_t>> edges; // indices into node_ids
        std::vector<EdgeFeatures> edge_features;

        bool operator==(const GraphObservation &) const = default;
    };

    // Running throughput extrema for min-max reward normalization.
    struct RewardNormalizer
    {
        double thr_min = std::numeric_limits<double>::infinity();
        double thr_max = -std::numeric_limits<double>::infinity();
    };

    // Widens the extrema with thr, then returns (thr - min) / (max - min);
    // 0.5 while max == min.
    double compute_reward(double thr, RewardNormalizer &norm);

    struct StepResult
    {
        GraphObservation observation;
        double reward = 0.0;
        bool done = false;
        ThroughputReport info;
    };

    // Builds the graph state from one window only; no history is kept.
    GraphObservation observe(const TopologySpec &spec, const MetricsWindow &window, const FeatureScale &scale = {});

    class Environment
    {
    public:
        Environment(TopologySpec spec, EnvConfig config);

        // Starts a new episode. Without an explicit seed the engine seed is
        // derived from (config.seed, episode index). Runs one warm-up window at
        // fraction 1.0 so the first observation carries real metrics. The
        // reward normalizer survives resets.
        GraphObservation reset(std::optional<std::uint64_t> seed = std::nullopt);

        // action in 0..9 selects throttle fraction (action + 1) / 10.
        StepResult step(int action);

        const TopologySpec &spec() const noexcept { return spec_; }
        const EnvConfig &config() const noexcept { return config_; }
        const RewardNormalizer &normalizer() const noexcept { return normalizer_; }
        const ThroughputReport &last_info() const noexcept { return last_info_; }
        int step_count() const noexcept { return step_count_; }
        bool active() const noexcept { return engine_ != nullptr && step_count_ < config_.episode_length; }
        std::uint64_t episodes() const noexcept { return episodes_; }
        const SimEngine *engine() const noexcept { return engine_.get(); }

    private:
        TopologySpec spec_;
        EnvConfig config_;
        std::unique_ptr<SimEngine> engine_;
        std::unique_ptr<WindowCollector> collector_;
        RewardNormalizer normalizer_;
        ThroughputReport last_info_;
        int step_count_ = 0;
        std::uint64_t episodes_ = 0;
    };
} // namespace rcsim
