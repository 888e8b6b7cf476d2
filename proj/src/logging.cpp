#include "radon/logging.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>

namespace radon {

const char* lifecycle_event_name(LifecycleEvent e) {
  switch (e) {
    case LifecycleEvent::spawn: return "spawn";
    case LifecycleEvent::fault: return "fault";
    case LifecycleEvent::restart: return "restart";
    case LifecycleEvent::expire: return "expire";
    case LifecycleEvent::exit_: return "exit";
  }
  return "unknown";
}

Logger::Logger()
    : sink_([](std::string_view line) {
        std::fwrite(line.data(), 1, line.size(), stderr);
        std::fputc('\n', stderr);
      }) {}

Logger::Logger(Sink sink) : sink_(std::move(sink)) {}

void Logger::set_sink(Sink sink) {
  std::lock_guard lk(mu_);
  sink_ = std::move(sink);
}

std::string Logger::iso8601_now() {
  using namespace std::chrono;
  auto now = system_clock::now();
  auto secs = system_clock::to_time_t(now);
  auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[40];
  int n = std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ",
                        tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                        tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return std::string(buf, static_cast<std::size_t>(n));
}

void Logger::lifecycle(LifecycleEvent e, std::string_view atom, std::string_view def) {
  std::string line = "event=";
  line += lifecycle_event_name(e);
  line += " atom=";
  line += atom;
  line += " def=";
  line += def;
  line += " t=";
  line += iso8601_now();
  emit(line);
}

void Logger::info(std::string_view line) { emit(std::string(line)); }

void Logger::emit(const std::string& line) {
  std::lock_guard lk(mu_);
  if (sink_) sink_(line);
}

}  // namespace radon
