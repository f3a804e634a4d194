#include "cyclone/error.hpp"

namespace cyclone {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::dimension: return "dimension";
    case Errc::contract: return "contract";
    case Errc::degenerate: return "degenerate";
    case Errc::insufficient_length: return "insufficient_length";
    case Errc::alignment: return "alignment";
    case Errc::gap: return "gap";
    case Errc::non_finite: return "non_finite";
    case Errc::frozen_drift: return "frozen_drift";
    case Errc::io: return "io";
    case Errc::config: return "config";
    case Errc::missing_artifact: return "missing_artifact";
  }
  return "unknown";
}

}  // namespace cyclone
