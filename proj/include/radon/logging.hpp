#pragma once

#include <functional>
#include <mutex>
#include <string>
#include <string_view>

namespace radon {

enum class LifecycleEvent { spawn, fault, restart, expire, exit_ };

const char* lifecycle_event_name(LifecycleEvent e);

/// Writes structured lines. Lifecycle transitions use the fixed format
///   event=<spawn|fault|restart|expire|exit> atom=<name> def=<def> t=<iso8601>
/// so they can be grepped from node logs.
class Logger {
 public:
  using Sink = std::function<void(std::string_view line)>;

  Logger();  // defaults to stderr
  explicit Logger(Sink sink);

  void set_sink(Sink sink);

  void lifecycle(LifecycleEvent e, std::string_view atom, std::string_view def);
  void info(std::string_view line);

  static std::string iso8601_now();

 private:
  void emit(const std::string& line);

  std::mutex mu_;
  Sink sink_;
};

}  // namespace radon
