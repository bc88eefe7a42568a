#include "ivins/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "json.hpp"

#include "ivins/errors.hpp"

namespace ivins {

namespace {

struct Field {
  const char* key;
  std::function<std::string(const ScenarioConfig&)> get;
  std::function<void(ScenarioConfig&, std::string_view)> set;  // throws std::invalid_argument
};

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double to_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw std::invalid_argument("expected a number, got '" + std::string(s) + "'");
  }
  return v;
}

long long to_integer(std::string_view s) {
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("expected an integer, got '" + std::string(s) + "'");
  }
  return v;
}

bool to_bool(std::string_view s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("expected true or false, got '" + std::string(s) + "'");
}

Field real(const char* key, double ScenarioConfig::*member) {
  return {key, [member](const ScenarioConfig& c) { return format_double(c.*member); },
          [member](ScenarioConfig& c, std::string_view v) { c.*member = to_double(v); }};
}

template <class Get>
Field real_ref(const char* key, Get ref) {
  return {key,
          [ref](const ScenarioConfig& c) {
            return format_double(ref(const_cast<ScenarioConfig&>(c)));
          },
          [ref](ScenarioConfig& c, std::string_view v) { ref(c) = to_double(v); }};
}

template <class Get>
Field integer_ref(const char* key, Get ref) {
  return {key,
          [ref](const ScenarioConfig& c) {
            return std::to_string(ref(const_cast<ScenarioConfig&>(c)));
          },
          [ref](ScenarioConfig& c, std::string_view v) {
            ref(c) = static_cast<std::remove_reference_t<decltype(ref(c))>>(to_integer(v));
          }};
}

// Sigma of an IMU noise block, stored as the diagonal of Q.
Field noise_sigma(const char* key, int block) {
  return {key,
          [block](const ScenarioConfig& c) {
            return format_double(std::sqrt(c.noise.Q(3 * block, 3 * block)));
          },
          [block](ScenarioConfig& c, std::string_view v) {
            const double s = to_double(v);
            if (s < 0.0) throw std::invalid_argument("noise sigma must be non-negative");
            c.noise.Q.block<3, 3>(3 * block, 3 * block) = s * s * Mat3::Identity();
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      real("sim.radius_m", &ScenarioConfig::radius),
      real("sim.angular_rate_rad_s", &ScenarioConfig::angular_rate),
      real("sim.vertical_amplitude_m", &ScenarioConfig::vertical_amplitude),
      real("sim.vertical_frequency_hz", &ScenarioConfig::vertical_frequency),
      real("sim.tilt_amplitude_rad", &ScenarioConfig::tilt_amplitude),
      real("sim.roll_frequency_hz", &ScenarioConfig::roll_frequency),
      real("sim.pitch_frequency_hz", &ScenarioConfig::pitch_frequency),
      real("sim.duration_s", &ScenarioConfig::duration),
      real("sim.imu_rate_hz", &ScenarioConfig::imu_rate),
      real("sim.camera_rate_hz", &ScenarioConfig::camera_rate),
      {"sim.sensor_noise",
       [](const ScenarioConfig& c) { return std::string(c.sensor_noise ? "true" : "false"); },
       [](ScenarioConfig& c, std::string_view v) { c.sensor_noise = to_bool(v); }},
      integer_ref("sim.seed", [](ScenarioConfig& c) -> std::uint64_t& { return c.seed; }),
      real("landmarks.radius_m", &ScenarioConfig::landmark_radius),
      real("landmarks.height_m", &ScenarioConfig::landmark_height),
      integer_ref("landmarks.count", [](ScenarioConfig& c) -> int& { return c.landmark_count; }),
      noise_sigma("noise.gyro", 0),
      noise_sigma("noise.gyro_walk", 1),
      noise_sigma("noise.accel", 2),
      noise_sigma("noise.accel_walk", 3),
      real_ref("noise.pixel_sigma", [](ScenarioConfig& c) -> double& { return c.noise.pixel_sigma; }),
      real_ref("gravity.x", [](ScenarioConfig& c) -> double& { return c.gravity.g.x(); }),
      real_ref("gravity.y", [](ScenarioConfig& c) -> double& { return c.gravity.g.y(); }),
      real_ref("gravity.z", [](ScenarioConfig& c) -> double& { return c.gravity.g.z(); }),
      real_ref("camera.fx", [](ScenarioConfig& c) -> double& { return c.camera.fx; }),
      real_ref("camera.fy", [](ScenarioConfig& c) -> double& { return c.camera.fy; }),
      real_ref("camera.cx", [](ScenarioConfig& c) -> double& { return c.camera.cx; }),
      real_ref("camera.cy", [](ScenarioConfig& c) -> double& { return c.camera.cy; }),
      integer_ref("camera.width", [](ScenarioConfig& c) -> int& { return c.camera.width; }),
      integer_ref("camera.height", [](ScenarioConfig& c) -> int& { return c.camera.height; }),
      {"camera.check_fov",
       [](const ScenarioConfig& c) { return std::string(c.camera.check_fov ? "true" : "false"); },
       [](ScenarioConfig& c, std::string_view v) { c.camera.check_fov = to_bool(v); }},
      integer_ref("filter.max_clones", [](ScenarioConfig& c) -> int& { return c.window.max_clones; }),
      integer_ref("filter.min_track_len",
                  [](ScenarioConfig& c) -> int& { return c.window.min_track_len; }),
      {"filter.chi2_confidence",
       [](const ScenarioConfig& c) {
         return c.window.chi2_confidence ? format_double(*c.window.chi2_confidence)
                                         : std::string("none");
       },
       [](ScenarioConfig& c, std::string_view v) {
         if (v == "none") {
           c.window.chi2_confidence.reset();
           return;
         }
         const double p = to_double(v);
         if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("confidence must be in (0, 1)");
         c.window.chi2_confidence = p;
       }},
      real("filter.initial_variance", &ScenarioConfig::initial_variance),
  };
  return table;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

const Field* find_field(std::string_view key) {
  for (const Field& f : fields()) {
    if (key == f.key) return &f;
  }
  return nullptr;
}

void validate_or_throw(const ScenarioConfig& cfg, const std::string& source) {
  try {
    cfg.validate();
  } catch (const ContractError& e) {
    throw ConfigError(source, 0, e.what());
  }
}

}  // namespace

ConfigError::ConfigError(const std::string& source, int line, const std::string& what)
    : std::runtime_error(line > 0 ? source + ":" + std::to_string(line) + ": " + what
                                  : source + ": " + what),
      line_(line) {}

ScenarioConfig parse_config(std::string_view text, const std::string& source) {
  ScenarioConfig cfg;
  std::set<std::string, std::less<>> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(source, line_no, "expected 'key = value'");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(source, line_no, "missing key");
    if (value.empty()) throw ConfigError(source, line_no, "missing value for '" + std::string(key) + "'");
    const Field* f = find_field(key);
    if (!f) throw ConfigError(source, line_no, "unknown key '" + std::string(key) + "'");
    if (!seen.insert(std::string(key)).second) {
      throw ConfigError(source, line_no, "duplicate key '" + std::string(key) + "'");
    }
    try {
      f->set(cfg, value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(source, line_no, std::string(key) + ": " + e.what());
    }
  }
  validate_or_throw(cfg, source);
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string(), 0, "cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (path.extension() != ".json") return parse_config(text, path.string());

  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string(), 0, e.what());
  }
  if (!doc.contains("config") || !doc["config"].is_object()) {
    throw ConfigError(path.string(), 0, "manifest has no \"config\" object");
  }
  std::string kv;
  for (const auto& [key, value] : doc["config"].items()) {
    kv += key + " = " + (value.is_string() ? value.get<std::string>() : value.dump()) + "\n";
  }
  return parse_config(kv, path.string());
}

std::vector<std::pair<std::string, std::string>> config_entries(const ScenarioConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const Field& f : fields()) out.emplace_back(f.key, f.get(cfg));
  return out;
}

std::string format_config(const ScenarioConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : config_entries(cfg)) out += k + " = " + v + "\n";
  return out;
}

}  // namespace ivins
