#include "rcsim/envserver.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <stdexcept>

namespace rcsim
{
    namespace
    {
        std::runtime_error sys_error(const std::string &what)
        {
            return std::runtime_error(what + ": " + std::strerror(errno));
        }

        bool write_all(int fd, std::string_view data)
        {
            while (!data.empty())
            {
                ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
                if (n < 0)
                {
                    if (errno == EINTR)
                        continue;
                    return false;
                }
                data.remove_prefix(static_cast<std::size_t>(n));
            }
            return true;
        }

        enum class ReadStatus
        {
            Line,
            Eof,
            Overflow,
        };

        // Pulls bytes until buffer holds a full line; the line is moved into out.
        ReadStatus read_line(int fd, std::string &buffer, std::string &out)
        {
            for (;;)
            {
                auto nl = buffer.find('\n');
                if (nl != std::string::npos)
                {
                    out.assign(buffer, 0, nl);
                    buffer.erase(0, nl + 1);
                    return ReadStatus::Line;
                }
                if (buffer.size() > kMaxLineBytes)
                    return ReadStatus::Overflow;
                char chunk[4096];
                ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
                if (n < 0 && errno == EINTR)
                    continue;
                if (n <= 0)
                    return ReadStatus::Eof;
                buffer.append(chunk, static_cast<std::size_t>(n));
            }
        }
    } // namespace

    EnvServer::EnvServer(ServerConfig config, TopologyRegistry registry)
        : config_(std::move(config)), registry_(std::make_shared<const TopologyRegistry>(std::move(registry)))
    {
        config_.env.validate();
    }

    EnvServer::~EnvServer()
    {
        stop();
        std::vector<std::thread> workers;
        {
            std::lock_guard lock(mu_);
            workers.swap(workers_);
        }
        for (auto &t : workers)
            if (t.joinable())
                t.join();
        if (listen_fd_ >= 0)
            ::close(listen_fd_);
    }

    void EnvServer::start()
    {
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(config_.port);
        if (::inet_pton(AF_INET, config_.bind.c_str(), &addr.sin_addr) != 1)
        {
            throw std::runtime_error("bad bind address: " + config_.bind);
        }
        listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (listen_fd_ < 0)
            throw sys_error("socket");
        int one = 1;
        ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        if (::bind(listen_fd_, reinterpret_cast<sockaddr *>(&addr), sizeof addr) < 0)
            throw sys_error("bind " + config_.bind + ":" + std::to_string(config_.port));
        if (::listen(listen_fd_, 16) < 0)
            throw sys_error("listen");
        socklen_t len = sizeof addr;
        ::getsockname(listen_fd_, reinterpret_cast<sockaddr *>(&addr), &len);
        port_ = ntohs(addr.sin_port);
    }

    void EnvServer::serve()
    {
        if (listen_fd_ < 0)
            throw std::runtime_error("serve() before start()");
        while (!stopping_.load())
        {
            pollfd p{listen_fd_, POLLIN, 0};
            int ready = ::poll(&p, 1, 100);
            if (ready <= 0)
                continue;
            int fd = ::accept(listen_fd_, nullptr, nullptr);
            if (fd < 0)
                continue;
            int one = 1;
            ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
            const std::uint64_t index = next_session_.fetch_add(1);
            std::lock_guard lock(mu_);
            open_fds_.push_back(fd);
            workers_.emplace_back([this, fd, index] { run_session(fd, index); });
        }
        std::vector<std::thread> workers;
        {
            std::lock_guard lock(mu_);
            workers.swap(workers_);
        }
        for (auto &t : workers)
            t.join();
    }

    void EnvServer::stop()
    {
        stopping_.store(true);
        std::lock_guard lock(mu_);
        for (int fd : open_fds_)
            ::shutdown(fd, SHUT_RDWR);
    }

    void EnvServer::run_session(int fd, std::uint64_t index)
    {
        Session session(registry_, config_.env, index, config_.base_seed);
        std::string buffer;
        std::string line;
        for (;;)
        {
            auto status = read_line(fd, buffer, line);
            if (status == ReadStatus::Eof)
                break;
            if (status == ReadStatus::Overflow)
            {
                write_all(fd, encode_error("bad_request", "line too long; closing") + "\n");
                break;
            }
            Session::Reply reply;
            try
            {
                reply = session.handle(line);
            }
            catch (const std::exception &e)
            {
                reply = Session::Reply{encode_error("internal", e.what()), true};
            }
            if (reply.line && !write_all(fd, *reply.line + "\n"))
                break;
            if (reply.close)
                break;
        }
        std::lock_guard lock(mu_);
        open_fds_.erase(std::remove(open_fds_.begin(), open_fds_.end(), fd), open_fds_.end());
        ::close(fd);
    }

    LineClient::LineClient(const std::string &host, std::uint16_t port)
    {
        addrinfo hints{};
        hints.ai_family = AF_INET;
        hints.ai_socktype = SOCK_STREAM;
        addrinfo *res = nullptr;
        if (int rc = ::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res); rc != 0)
        {
            throw std::runtime_error("resolve " + host + ": " + ::gai_strerror(rc));
        }
        fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
        if (fd_ < 0 || ::connect(fd_, res->ai_addr, res->ai_addrlen) < 0)
        {
            auto err = sys_error("connect " + host + ":" + std::to_string(port));
            ::freeaddrinfo(res);
            if (fd_ >= 0)
                ::close(fd_);
            fd_ = -1;
            throw err;
        }
        ::freeaddrinfo(res);
        int one = 1;
        ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    }

    LineClient::~LineClient()
    {
        if (fd_ >= 0)
            ::close(fd_);
    }

    void LineClient::send_line(std::string_view line)
    {
        std::string framed(line);
        framed.push_back('\n');
        if (!write_all(fd_, framed))
            throw sys_error("send");
    }

    std::optional<std::string> LineClient::read_line()
    {
        std::string out;
        if (rcsim::read_line(fd_, buffer_, out) != ReadStatus::Line)
            return std::nullopt;
        return out;
    }

    std::optional<std::string> LineClient::request(std::string_view line)
    {
        send_line(line);
        return read_line();
    }
} // namespace rcsim
