#include <cstdint>
#include <cstdlib>
#include <string>

#include "mentra/trajectory_format.hpp"

extern "C" int LLVMFuzzerTestOneInput(const std::uint8_t* data, std::size_t size) {
  const std::string s(reinterpret_cast<const char*>(data), size);
  const auto r = mentra::try_parse_trajectory(s, {});
  if (r.ok()) {
    if (mentra::parse_trajectory(mentra::render(*r.value)) != *r.value) std::abort();
  } else if (!mentra::is_format_code(r.error->code)) {
    std::abort();
  }
  mentra::validate_text(s, {});
  return 0;
}
