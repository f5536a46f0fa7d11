#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstring>
#include <limits>
#include "json.hpp"

#include "retoksync/errors.hpp"
#include "retoksync/provider.hpp"

namespace retoksync {
namespace {

constexpr int kIoTimeoutMs = 30000;
constexpr double kSumTolerance = 1e-6;

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string errno_text(const char* what) {
  return std::string(what) + ": " + std::strerror(errno);
}

}  // namespace

RemoteEndpoint RemoteEndpoint::parse(std::string_view address) {
  RemoteEndpoint ep;
  if (address.starts_with("tcp://")) {
    const std::string_view rest = address.substr(6);
    const std::size_t colon = rest.rfind(':');
    if (colon == std::string_view::npos || colon == 0) {
      throw ConfigError("endpoint needs host:port: " + std::string(address));
    }
    ep.kind = Kind::kTcp;
    ep.host = std::string(rest.substr(0, colon));
    const std::string_view port = rest.substr(colon + 1);
    unsigned value = 0;
    auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
    if (ec != std::errc() || ptr != port.data() + port.size() || value == 0 || value > 65535) {
      throw ConfigError("bad port in endpoint: " + std::string(address));
    }
    ep.port = static_cast<std::uint16_t>(value);
    return ep;
  }
  if (address.starts_with("stdio:")) {
    ep.kind = Kind::kStdio;
    ep.command = std::string(address.substr(6));
    if (ep.command.empty()) throw ConfigError("stdio endpoint needs a command");
    return ep;
  }
  throw ConfigError("endpoint must start with tcp:// or stdio: (" + std::string(address) + ")");
}

std::string RemoteEndpoint::to_string() const {
  if (kind == Kind::kTcp) return "tcp://" + host + ":" + std::to_string(port);
  return "stdio:" + command;
}

struct RemoteProvider::Connection {
  explicit Connection(const RemoteEndpoint& ep) {
    if (ep.kind == RemoteEndpoint::Kind::kTcp) {
      open_tcp(ep);
    } else {
      spawn(ep.command);
    }
  }

  ~Connection() {
    if (fd >= 0) ::close(fd);
    if (child > 0) {
      ::kill(child, SIGTERM);
      int status = 0;
      ::waitpid(child, &status, 0);
    }
  }

  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  void open_tcp(const RemoteEndpoint& ep) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* found = nullptr;
    const std::string port = std::to_string(ep.port);
    if (int rc = ::getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &found); rc != 0) {
      throw TransportError(std::string("resolve ") + ep.host + ": " + ::gai_strerror(rc));
    }
    for (addrinfo* ai = found; ai != nullptr; ai = ai->ai_next) {
      const int s = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
      if (s < 0) continue;
      if (::connect(s, ai->ai_addr, ai->ai_addrlen) == 0) {
        fd = s;
        break;
      }
      ::close(s);
    }
    ::freeaddrinfo(found);
    if (fd < 0) throw TransportError("cannot connect to " + ep.to_string());
  }

  void spawn(const std::string& command) {
    int sv[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM, 0, sv) != 0) {
      throw TransportError(errno_text("socketpair"));
    }
    const pid_t pid = ::fork();
    if (pid < 0) {
      ::close(sv[0]);
      ::close(sv[1]);
      throw TransportError(errno_text("fork"));
    }
    if (pid == 0) {
      ::close(sv[0]);
      ::dup2(sv[1], STDIN_FILENO);
      ::dup2(sv[1], STDOUT_FILENO);
      ::close(sv[1]);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(sv[1]);
    fd = sv[0];
    child = pid;
  }

  void send_line(const std::string& line) {
    std::size_t sent = 0;
    while (sent < line.size()) {
      const ssize_t n = ::send(fd, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError(errno_text("send"));
      }
      sent += static_cast<std::size_t>(n);
    }
  }

  std::string read_line() {
    for (;;) {
      const std::size_t nl = buffer.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer.substr(0, nl);
        buffer.erase(0, nl + 1);
        return line;
      }
      pollfd p{fd, POLLIN, 0};
      const int ready = ::poll(&p, 1, kIoTimeoutMs);
      if (ready < 0) {
        if (errno == EINTR) continue;
        throw TransportError(errno_text("poll"));
      }
      if (ready == 0) throw TransportError("timed out waiting for response");
      char chunk[4096];
      const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError(errno_text("recv"));
      }
      if (n == 0) throw TransportError("connection closed by peer");
      buffer.append(chunk, static_cast<std::size_t>(n));
    }
  }

  int fd = -1;
  pid_t child = -1;
  std::string buffer;
};

RemoteProvider::RemoteProvider(RemoteEndpoint endpoint, std::size_t top_k,
                               std::size_t max_attempts)
    : endpoint_(std::move(endpoint)), top_k_(top_k), max_attempts_(max_attempts) {
  if (top_k_ < 2) throw ConfigError("remote provider top_k must be >= 2");
  if (max_attempts_ == 0) throw ConfigError("remote provider needs at least one attempt");
}

RemoteProvider::~RemoteProvider() = default;

std::string RemoteProvider::format_request(std::span<const TokenId> context, std::size_t top_k) {
  nlohmann::json req;
  req["context"] = std::vector<TokenId>(context.begin(), context.end());
  req["top_k"] = top_k;
  return req.dump();
}

Distribution RemoteProvider::parse_response(std::string_view line) {
  const auto fail = [](const std::string& why) -> ProviderError {
    return ProviderError("bad provider response: " + why, 1, false);
  };
  nlohmann::json doc = nlohmann::json::parse(line, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw fail("not a JSON object");
  if (doc.contains("error")) {
    throw fail("server error: " + (doc["error"].is_string() ? doc["error"].get<std::string>()
                                                              : doc["error"].dump()));
  }
  if (!doc.contains("ids") || !doc["ids"].is_array()) throw fail("missing ids array");
  if (!doc.contains("probs") || !doc["probs"].is_array()) throw fail("missing probs array");
  const auto& ids = doc["ids"];
  const auto& probs = doc["probs"];
  if (ids.size() != probs.size()) throw fail("ids and probs differ in length");
  if (ids.empty()) throw fail("empty distribution");

  Distribution d;
  d.entries.reserve(ids.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!ids[i].is_number_unsigned() && !(ids[i].is_number_integer() && ids[i].get<long long>() >= 0)) {
      throw fail("id " + std::to_string(i) + " is not a non-negative integer");
    }
    if (!probs[i].is_number()) throw fail("prob " + std::to_string(i) + " is not a number");
    const auto id = ids[i].get<std::uint64_t>();
    if (id > std::numeric_limits<TokenId>::max()) throw fail("id out of range");
    const double p = probs[i].get<double>();
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) throw fail("prob outside [0, 1]");
    if (i > 0) {
      const TokenProb& prev = d.entries.back();
      if (p > prev.prob || (p == prev.prob && id <= prev.id)) {
        throw fail("entries not in canonical order at index " + std::to_string(i));
      }
    }
    d.entries.push_back({static_cast<TokenId>(id), p});
    sum += p;
  }
  if (std::fabs(sum - 1.0) > kSumTolerance) throw fail("probabilities sum to " + std::to_string(sum));
  for (std::size_t i = 0; i < d.entries.size(); ++i) {
    for (std::size_t j = i + 1; j < d.entries.size(); ++j) {
      if (d.entries[i].id == d.entries[j].id) throw fail("duplicate id");
    }
  }
  return d;
}

Distribution RemoteProvider::next_distribution(std::span<const TokenId> context) const {
  const std::string request = format_request(context, top_k_) + "\n";
  std::lock_guard<std::mutex> lock(mutex_);
  std::string last_error;
  for (std::size_t attempt = 1; attempt <= max_attempts_; ++attempt) {
    std::string line;
    try {
      if (!conn_) conn_ = std::make_unique<Connection>(endpoint_);
      conn_->send_line(request);
      line = conn_->read_line();
    } catch (const TransportError& e) {
      last_error = e.what();
      conn_.reset();
      continue;
    }
    Distribution d;
    try {
      d = parse_response(line);
    } catch (const ProviderError& e) {
      throw ProviderError(e.what(), attempt, false);
    }
    if (d.entries.size() > top_k_) {
      throw ProviderError("bad provider response: more than top_k entries", attempt, false);
    }
    return d;
  }
  throw ProviderError("provider " + endpoint_.to_string() + " unreachable after " +
                          std::to_string(max_attempts_) + " attempts: " + last_error,
                      max_attempts_, true);
}

std::string RemoteProvider::describe() const {
  return "remote endpoint=" + endpoint_.to_string() + " top_k=" + std::to_string(top_k_);
}

}  // namespace retoksync
