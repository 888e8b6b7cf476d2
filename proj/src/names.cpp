#include "radon/names.hpp"

#include <cassert>

namespace radon {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::invalid_name: return "invalid_name";
    case Errc::invalid_regex: return "invalid_regex";
    case Errc::syntax_error: return "syntax_error";
    case Errc::semantic_error: return "semantic_error";
    case Errc::duplicate: return "duplicate";
    case Errc::not_found: return "not_found";
    case Errc::unknown_destination: return "unknown_destination";
    case Errc::conflict: return "conflict";
    case Errc::constraint_mismatch: return "constraint_mismatch";
    case Errc::too_large: return "too_large";
    case Errc::overflow: return "overflow";
    case Errc::timeout: return "timeout";
    case Errc::stopped: return "stopped";
    case Errc::io_error: return "io_error";
    case Errc::protocol_error: return "protocol_error";
    case Errc::unavailable: return "unavailable";
  }
  return "unknown";
}

bool name_char_ok(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
         (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-' || c == '/';
}

Result<void> check_name_lexical(std::string_view s) {
  if (s.empty()) return make_error(Errc::invalid_name, "name is empty");
  if (s.size() > kMaxNameBytes)
    return make_error(Errc::invalid_name,
                      "name exceeds " + std::to_string(kMaxNameBytes) + " bytes");
  for (char c : s) {
    if (!name_char_ok(c))
      return make_error(Errc::invalid_name,
                        std::string("illegal character '") + c + "' in name");
  }
  return {};
}

Result<AtomName> AtomName::parse(std::string_view s) {
  if (auto r = check_name_lexical(s); !r) return r.error();
  return AtomName(std::string(s));
}

AtomName AtomName::unchecked(std::string s) {
  assert(check_name_lexical(s).ok());
  AtomName n;
  n.value_ = std::move(s);
  return n;
}

Result<Alias> Alias::parse(std::string_view s) {
  if (auto r = check_name_lexical(s); !r) return r.error();
  return Alias(std::string(s));
}

Alias Alias::unchecked(std::string s) {
  assert(check_name_lexical(s).ok());
  Alias a;
  a.value_ = std::move(s);
  return a;
}

}  // namespace radon
