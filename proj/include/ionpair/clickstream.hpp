#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ionpair/atom_model.hpp"

namespace ionpair {

enum class Wavelength : std::uint8_t { Blue397 = 0, Red866 = 1 };

const char* to_string(Wavelength w);

struct PhotonEvent {
  std::int64_t t_ps;
  Polarization pol;
  Wavelength wl;

  friend bool operator==(const PhotonEvent&, const PhotonEvent&) = default;
};

struct ClickStream {
  std::uint32_t channel = 0;
  std::vector<PhotonEvent> events;
  std::int64_t duration_ps = 0;

  // metadata, not part of the binary format
  std::uint64_t seed = 0;
  std::string params_fingerprint;
  double efficiency = 1.0;

  /// Timestamps strictly increasing and inside [0, duration].
  void validate() const;
  bool is_sorted() const;
};

/// Events selected by polarization and/or wavelength.
struct TagFilter {
  std::optional<Polarization> pol;
  std::optional<Wavelength> wl;

  bool matches(const PhotonEvent& e) const {
    return (!pol || e.pol == *pol) && (!wl || e.wl == *wl);
  }
  friend bool operator==(const TagFilter&, const TagFilter&) = default;
};

ClickStream filter(const ClickStream& s, const TagFilter& f);

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// IONCLK1 binary layout, little endian:
//   char[8] "IONCLK1\0", u32 channel, u64 count, u64 duration_ps,
//   then per event: u64 timestamp_ps, u8 polarization (0 sigma-, 1 pi, 2 sigma+),
//   u8 wavelength (0 = 397 nm, 1 = 866 nm).
void write_ionclk(std::ostream& out, const ClickStream& s);
ClickStream read_ionclk(std::istream& in);
void write_ionclk_file(const std::string& path, const ClickStream& s);

// CSV mirror: header "timestamp_ps,pol,wavelength", pol in {sigma-, pi, sigma+},
// wavelength in {397, 866}. Optional leading '#' comment lines.
void write_clicks_csv(std::ostream& out, const ClickStream& s);
ClickStream read_clicks_csv(std::istream& in, std::uint32_t channel = 0);

/// Reads either format, chosen by the magic bytes.
ClickStream read_clicks_file(const std::string& path);

}  // namespace ionpair
