#include "varsel/runner.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <mutex>
#include <thread>

#include "varsel/csv.hpp"
#include "varsel/toydsl.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace varsel {

namespace {

using Clock = std::chrono::steady_clock;

void set_nonblocking(int fd) {
  fcntl(fd, F_SETFL, fcntl(fd, F_GETFL, 0) | O_NONBLOCK);
}

void set_cloexec(int fd) {
  fcntl(fd, F_SETFD, fcntl(fd, F_GETFD, 0) | FD_CLOEXEC);
}

struct Pipe {
  int read_end = -1;
  int write_end = -1;

  Pipe() {
    int fds[2];
    if (pipe(fds) != 0) raise(Errc::IoError, std::string("pipe: ") + std::strerror(errno));
    read_end = fds[0];
    write_end = fds[1];
  }
  ~Pipe() {
    close_read();
    close_write();
  }
  void close_read() {
    if (read_end >= 0) ::close(read_end);
    read_end = -1;
  }
  void close_write() {
    if (write_end >= 0) ::close(write_end);
    write_end = -1;
  }
};

void ignore_sigpipe_once() {
  // A child that exits before reading its stdin must not kill the parent.
  static std::once_flag once;
  std::call_once(once, [] { signal(SIGPIPE, SIG_IGN); });
}

struct ChildResult {
  std::string out;
  std::string err;
  int status = 0;
};

[[noreturn]] void child_exec(const Program& program, int in_fd, int out_fd, int err_fd) {
  dup2(in_fd, STDIN_FILENO);
  dup2(out_fd, STDOUT_FILENO);
  dup2(err_fd, STDERR_FILENO);
  if (!program.workdir.empty() && chdir(program.workdir.c_str()) != 0) {
    const char msg[] = "cannot enter working directory\n";
    (void)!write(STDERR_FILENO, msg, sizeof(msg) - 1);
    _exit(127);
  }
  std::vector<char*> argv;
  argv.reserve(program.argv.size() + 1);
  for (const std::string& a : program.argv) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);
  execvp(argv[0], argv.data());
  const std::string msg = "exec failed: " + std::string(std::strerror(errno)) + "\n";
  (void)!write(STDERR_FILENO, msg.data(), msg.size());
  _exit(127);
}

void kill_and_reap(pid_t pid) {
  kill(pid, SIGKILL);
  int status = 0;
  waitpid(pid, &status, 0);
}

ChildResult drive_child(pid_t pid, Pipe& in, Pipe& out, Pipe& err,
                        const std::string& input, const RunLimits& limits) {
  ignore_sigpipe_once();
  set_nonblocking(in.write_end);
  set_nonblocking(out.read_end);
  set_nonblocking(err.read_end);

  const auto deadline =
      Clock::now() + std::chrono::duration_cast<Clock::duration>(
                         std::chrono::duration<double>(limits.wall_timeout_s));

  ChildResult result;
  std::size_t written = 0;
  bool stdin_open = true;
  char buf[65536];

  while (stdin_open || out.read_end >= 0 || err.read_end >= 0) {
    const auto now = Clock::now();
    if (now >= deadline) {
      kill_and_reap(pid);
      raise(Errc::Timeout, "wall timeout of " + format_double(limits.wall_timeout_s) +
                               "s exceeded");
    }
    const int remaining_ms = static_cast<int>(
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count() + 1);

    pollfd fds[3];
    nfds_t nfds = 0;
    int in_slot = -1, out_slot = -1, err_slot = -1;
    if (stdin_open) {
      in_slot = static_cast<int>(nfds);
      fds[nfds++] = {in.write_end, POLLOUT, 0};
    }
    if (out.read_end >= 0) {
      out_slot = static_cast<int>(nfds);
      fds[nfds++] = {out.read_end, POLLIN, 0};
    }
    if (err.read_end >= 0) {
      err_slot = static_cast<int>(nfds);
      fds[nfds++] = {err.read_end, POLLIN, 0};
    }

    const int rc = poll(fds, nfds, remaining_ms);
    if (rc < 0) {
      if (errno == EINTR) continue;
      kill_and_reap(pid);
      raise(Errc::IoError, std::string("poll: ") + std::strerror(errno));
    }
    if (rc == 0) continue;  // deadline check at loop top

    if (in_slot >= 0 && (fds[in_slot].revents & (POLLOUT | POLLERR | POLLHUP))) {
      if (fds[in_slot].revents & (POLLERR | POLLHUP)) {
        in.close_write();
        stdin_open = false;  // child stopped reading; it may still answer
      } else {
        const ssize_t n = write(in.write_end, input.data() + written,
                                std::min<std::size_t>(input.size() - written, 65536));
        if (n > 0) written += static_cast<std::size_t>(n);
        if (n < 0 && errno != EAGAIN && errno != EINTR) {
          in.close_write();
          stdin_open = false;
        }
        if (written == input.size()) {
          in.close_write();
          stdin_open = false;
        }
      }
    }

    for (auto [slot, pipe_ptr, sink] :
         {std::tuple{out_slot, &out, &result.out}, std::tuple{err_slot, &err, &result.err}}) {
      if (slot < 0 || !(fds[slot].revents & (POLLIN | POLLHUP | POLLERR))) continue;
      const ssize_t n = read(pipe_ptr->read_end, buf, sizeof(buf));
      if (n > 0) {
        sink->append(buf, static_cast<std::size_t>(n));
        if (pipe_ptr == &out && result.out.size() > limits.max_output_bytes) {
          kill_and_reap(pid);
          raise(Errc::OutputTooLarge,
                "child produced more than " + std::to_string(limits.max_output_bytes) +
                    " bytes on stdout");
        }
      } else if (n == 0 || (n < 0 && errno != EAGAIN && errno != EINTR)) {
        pipe_ptr->close_read();
      }
    }
  }

  // All pipes are done; give the child the rest of the window to exit.
  while (true) {
    int status = 0;
    const pid_t got = waitpid(pid, &status, WNOHANG);
    if (got == pid) {
      result.status = status;
      return result;
    }
    if (Clock::now() >= deadline) {
      kill_and_reap(pid);
      raise(Errc::Timeout, "child kept running after closing its streams");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
}

std::string stderr_excerpt(const std::string& err) {
  constexpr std::size_t kMax = 4096;
  if (err.size() <= kMax) return err;
  return "..." + err.substr(err.size() - kMax);
}

Dataset run_external(const Program& program, const InputSpace& theta,
                     const RunLimits& limits) {
  if (program.argv.empty())
    raise(Errc::MalformedOutput, "external program '" + program.id + "' has no argv");

  Pipe in, out, err;
  set_cloexec(in.write_end);
  set_cloexec(out.read_end);
  set_cloexec(err.read_end);

  const pid_t pid = fork();
  if (pid < 0) raise(Errc::IoError, std::string("fork: ") + std::strerror(errno));
  if (pid == 0) child_exec(program, in.read_end, out.write_end, err.write_end);

  in.close_read();
  out.close_write();
  err.close_write();

  ChildResult child = drive_child(pid, in, out, err, to_csv(theta), limits);

  if (WIFSIGNALED(child.status)) {
    raise(Errc::NonZeroExit, "child killed by signal " +
                                 std::to_string(WTERMSIG(child.status)) + "; stderr: " +
                                 stderr_excerpt(child.err));
  }
  const int exit_code = WEXITSTATUS(child.status);
  if (exit_code != 0) {
    raise(Errc::NonZeroExit, "child exited with code " + std::to_string(exit_code) +
                                 "; stderr: " + stderr_excerpt(child.err));
  }
  try {
    return parse_csv(child.out);
  } catch (const Error& e) {
    raise(Errc::MalformedOutput, std::string("child output is not a valid dataset: ") +
                                     e.what());
  }
}

}  // namespace

Program Program::dsl(std::string id, std::string_view source) {
  Program p;
  p.id = std::move(id);
  p.kind = ProgramKind::Dsl;
  p.source_text = dsl::Program::parse(source).source();
  return p;
}

Program Program::external(std::string id, std::vector<std::string> argv,
                          std::string source_text, std::string workdir) {
  if (source_text.empty())
    raise(Errc::MalformedOutput, "external program '" + id + "' needs source text");
  Program p;
  p.id = std::move(id);
  p.kind = ProgramKind::External;
  p.argv = std::move(argv);
  p.source_text = std::move(source_text);
  p.workdir = std::move(workdir);
  return p;
}

ProgramSet::ProgramSet(std::vector<Program> programs_in, std::string base_id_in)
    : programs(std::move(programs_in)), base_id(std::move(base_id_in)) {
  if (programs.empty()) raise(Errc::RangeError, "program set is empty");
  for (std::size_t i = 0; i < programs.size(); ++i) {
    for (std::size_t j = i + 1; j < programs.size(); ++j) {
      if (programs[i].id == programs[j].id)
        raise(Errc::RangeError, "duplicate program id '" + programs[i].id + "'");
    }
  }
  if (!find(base_id)) raise(Errc::RangeError, "base id '" + base_id + "' not in set");
}

const Program& ProgramSet::base() const { return *find(base_id); }

const Program* ProgramSet::find(const std::string& id) const {
  const std::ptrdiff_t i = index_of(id);
  return i < 0 ? nullptr : &programs[static_cast<std::size_t>(i)];
}

std::ptrdiff_t ProgramSet::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < programs.size(); ++i) {
    if (programs[i].id == id) return static_cast<std::ptrdiff_t>(i);
  }
  return -1;
}

Dataset run(const Program& program, const InputSpace& theta, const RunLimits& limits) {
  if (limits.wall_timeout_s <= 0.0 || limits.max_output_bytes == 0)
    raise(Errc::RangeError, "run limits must be strictly positive");
  if (program.kind == ProgramKind::Dsl) {
    return dsl::Program::parse(program.source_text).evaluate(theta);
  }
  return run_external(program, theta, limits);
}

RunOutcome try_run(const Program& program, const InputSpace& theta,
                   const RunLimits& limits) noexcept {
  RunOutcome outcome;
  try {
    outcome.data = run(program, theta, limits);
    outcome.ok = true;
  } catch (const Error& e) {
    outcome.code = e.code();
    outcome.message = e.what();
  } catch (const std::exception& e) {
    outcome.code = Errc::IoError;
    outcome.message = e.what();
  }
  return outcome;
}

std::vector<RunOutcome> run_all(const std::vector<Program>& programs,
                                const InputSpace& theta, const RunLimits& limits,
                                int jobs) {
  std::vector<RunOutcome> outcomes(programs.size());
#ifdef _OPENMP
  int threads = jobs > 0 ? jobs : omp_get_max_threads();
  threads = std::max(1, threads);
#pragma omp parallel for schedule(dynamic) num_threads(threads)
#endif
  for (long long i = 0; i < static_cast<long long>(programs.size()); ++i) {
    outcomes[static_cast<std::size_t>(i)] =
        try_run(programs[static_cast<std::size_t>(i)], theta, limits);
  }
  return outcomes;
}

}  // namespace varsel
