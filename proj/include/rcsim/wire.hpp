#pragma once

#include "rcsim/environment.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace rcsim
{
    inline constexpr std::string_view kProtocolVersion = "rcenv/1";
    inline constexpr std::uint16_t kDefaultPort = 7777;
    // Longer lines are treated as broken framing.
    inline constexpr std::size_t kMaxLineBytes = 1 << 20;

    using TopologyRegistry = std::map<std::string, TopologySpec, std::less<>>;

    // The three builtins.
    TopologyRegistry builtin_registry();
    // Builtins plus every *.json document in dir, keyed by the document name.
    TopologyRegistry load_registry(const std::string &dir);

    struct ObservationMessage
    {
        int step = 0;
        GraphObservation observation;
        double reward = 0.0;
        bool done = false;
        ThroughputReport info;

        bool operator==(const ObservationMessage &) const = default;
    };

    struct WelcomeMessage
    {
        std::string version;
        std::string session;
        std::string topology;
        std::size_t n_nodes = 0;
        std::size_t n_edges = 0;
        int n_actions = 0;
        int feature_dim = 0;
        int edge_feature_dim = 0;
    };

    struct ErrorMessage
    {
        std::string code;
        std::string message;
    };

    // One line each, without the trailing newline.
    std::string encode_observation(const ObservationMessage &msg);
    std::string encode_welcome(const WelcomeMessage &msg);
    std::string encode_error(std::string_view code, std::string_view message);

    // Throws std::invalid_argument on anything that is not a well-formed message of that kind.
    ObservationMessage decode_observation(std::string_view line);
    WelcomeMessage decode_welcome(std::string_view line);
    ErrorMessage decode_error(std::string_view line);
    // "welcome", "observation", "error", ... or empty if the line is not an object with a kind.
    std::string message_kind(std::string_view line);

    // Socket-independent protocol state machine for one connection.
    class Session
    {
    public:
        enum class State : std::uint8_t
        {
            AwaitingHello,
            AwaitingReset,
            AwaitingStep,
            Closed,
        };

        struct Reply
        {
            std::optional<std::string> line; // absent for close
            bool close = false;
        };

        Session(std::shared_ptr<const TopologyRegistry> registry, EnvConfig base, std::uint64_t index,
                std::uint64_t base_seed);

        Reply handle(std::string_view line);

        State state() const noexcept { return state_; }
        const std::string &id() const noexcept { return id_; }

    private:
        std::shared_ptr<const TopologyRegistry> registry_;
        EnvConfig base_;
        std::string id_;
        std::uint64_t seed_;
        State state_ = State::AwaitingHello;
        std::unique_ptr<Environment> env_;
    };

    std::string_view to_string(Session::State s) noexcept;
} // namespace rcsim
