#include <cerrno>
#include <csignal>
#include <cstring>

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "evavla/error.hpp"
#include "evavla/oracle.hpp"

namespace evavla {

namespace {

std::string errno_text(const char* what) {
  return std::string(what) + ": " + std::strerror(errno);
}

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~Fd() { reset(); }
  int get() const { return fd_; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

// Buffered line reader/writer over a pair of descriptors.
class FdLineTransport : public LineTransport {
 public:
  FdLineTransport(Fd in, Fd out, bool socket)
      : in_(std::move(in)), out_(std::move(out)), socket_(socket) {}

  void send_line(std::string_view line) override {
    const int fd = socket_ ? in_.get() : out_.get();
    std::size_t off = 0;
    while (off < line.size()) {
      const ssize_t n = socket_ ? ::send(fd, line.data() + off, line.size() - off,
                                         MSG_NOSIGNAL)
                                : ::write(fd, line.data() + off, line.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorCode::Transport, errno_text("write to victim"));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::string recv_line(std::chrono::milliseconds timeout) override {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (true) {
      if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0)
        throw Error(ErrorCode::Timeout, "no reply from victim within " +
                                            std::to_string(timeout.count()) + " ms");
      pollfd p{in_.get(), POLLIN, 0};
      const int rc = ::poll(&p, 1, static_cast<int>(left.count()));
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorCode::Transport, errno_text("poll"));
      }
      if (rc == 0) continue;
      char chunk[4096];
      const ssize_t n = ::read(in_.get(), chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorCode::Transport, errno_text("read from victim"));
      }
      if (n == 0) throw Error(ErrorCode::Transport, "victim closed the stream");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 protected:
  Fd in_;
  Fd out_;
  bool socket_;
  std::string buffer_;
};

class SubprocessTransport final : public FdLineTransport {
 public:
  SubprocessTransport(Fd from_child, Fd to_child, pid_t pid)
      : FdLineTransport(std::move(from_child), std::move(to_child), false), pid_(pid) {}

  ~SubprocessTransport() override {
    out_.reset();  // EOF on the child's stdin asks it to exit
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid_, nullptr, WNOHANG) == pid_) return;
      ::usleep(20000);
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
  }

 private:
  pid_t pid_;
};

}  // namespace

std::unique_ptr<LineTransport> spawn_subprocess(const std::vector<std::string>& argv) {
  if (argv.empty()) throw Error(ErrorCode::Config, "empty victim command");
  std::signal(SIGPIPE, SIG_IGN);
  int to_child[2];
  int from_child[2];
  if (::pipe2(to_child, O_CLOEXEC) != 0) throw Error(ErrorCode::Transport, errno_text("pipe"));
  if (::pipe2(from_child, O_CLOEXEC) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw Error(ErrorCode::Transport, errno_text("pipe"));
  }
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  const pid_t pid = ::fork();
  if (pid < 0) throw Error(ErrorCode::Transport, errno_text("fork"));
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::execvp(args[0], args.data());
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  return std::make_unique<SubprocessTransport>(Fd(from_child[0]), Fd(to_child[1]), pid);
}

std::unique_ptr<LineTransport> connect_tcp(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0)
    throw Error(ErrorCode::Transport, host + ": " + ::gai_strerror(rc));
  Fd sock;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    Fd s(::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol));
    if (s.get() < 0) continue;
    if (::connect(s.get(), ai->ai_addr, ai->ai_addrlen) == 0) {
      sock = std::move(s);
      break;
    }
  }
  ::freeaddrinfo(res);
  if (sock.get() < 0)
    throw Error(ErrorCode::Transport, "cannot connect to " + host + ":" + service);
  return std::make_unique<FdLineTransport>(std::move(sock), Fd(), true);
}

}  // namespace evavla
