#pragma once

#include <numbers>

// Unit helpers. All internal quantities are SI (tesla, meter, second, rad);
// these converters exist for configuration files and literature values that
// arrive in gauss, G/cm, ms, mm or cm/s.
namespace blochdg::units {

inline constexpr double pi = std::numbers::pi_v<double>;

constexpr double gauss_to_tesla(double g) { return g * 1e-4; }
constexpr double tesla_to_gauss(double t) { return t * 1e4; }
constexpr double gauss_per_cm_to_tesla_per_m(double gcm) { return gcm * 1e-2; }
constexpr double mtesla_per_m_to_tesla_per_m(double mt) { return mt * 1e-3; }
constexpr double ms_to_s(double ms) { return ms * 1e-3; }
constexpr double s_to_ms(double s) { return s * 1e3; }
constexpr double mm_to_m(double mm) { return mm * 1e-3; }
constexpr double m_to_mm(double m) { return m * 1e3; }
constexpr double cm_per_s_to_m_per_s(double cms) { return cms * 1e-2; }
constexpr double mm_per_s_to_m_per_s(double mms) { return mms * 1e-3; }
constexpr double m_per_s_to_mm_per_s(double ms) { return ms * 1e3; }
constexpr double deg_to_rad(double deg) { return deg * pi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / pi; }

}  // namespace blochdg::units
