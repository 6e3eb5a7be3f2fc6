#pragma once

#include "rcsim/wire.hpp"

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace rcsim
{
    struct ServerConfig
    {
        std::string bind = "127.0.0.1";
        std::uint16_t port = kDefaultPort; // 0 picks an ephemeral port
        std::uint64_t base_seed = 0;
        EnvConfig env{};
    };

    // Line-protocol TCP server, one thread and one Session per connection.
    class EnvServer
    {
    public:
        EnvServer(ServerConfig config, TopologyRegistry registry);
        ~EnvServer();
        EnvServer(const EnvServer &) = delete;
        EnvServer &operator=(const EnvServer &) = delete;

        // Binds and listens. Throws std::runtime_error on failure.
        void start();
        // Accepts until stop(). Returns after all session threads have joined.
        void serve();
        void stop();

        std::uint16_t port() const noexcept { return port_; }
        std::uint64_t sessions_started() const noexcept { return next_session_.load(); }

    private:
        void run_session(int fd, std::uint64_t index);

        ServerConfig config_;
        std::shared_ptr<const TopologyRegistry> registry_;
        int listen_fd_ = -1;
        std::uint16_t port_ = 0;
        std::atomic<bool> stopping_{false};
        std::atomic<std::uint64_t> next_session_{0};
        std::mutex mu_;
        std::vector<std::thread> workers_;
        std::vector<int> open_fds_;
    };

    // Minimal blocking line client, used by tests and the CLI.
    class LineClient
    {
    public:
        LineClient(const std::string &host, std::uint16_t port);
        ~LineClient();
        LineClient(const LineClient &) = delete;
        LineClient &operator=(const LineClient &) = delete;

        void send_line(std::string_view line);
        // nullopt once the peer has closed.
        std::optional<std::string> read_line();
        // send_line then read_line.
        std::optional<std::string> request(std::string_view line);

    private:
        int fd_ = -1;
        std::string buffer_;
    };
} // namespace rcsim
