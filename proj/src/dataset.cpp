#include "trajproj/config.hpp"
#include "trajproj/integrators.hpp"
#include "trajproj/io.hpp"

namespace trajproj {

std::string dataset_file_name(std::uint64_t seed) { return "traj_" + std::to_string(seed) + ".utrj"; }

DatasetManifest generate_dataset(const SystemConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                 const std::filesystem::path& out_dir) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  DatasetManifest m;
  m.config = cfg;
  m.seeds = seeds;
  for (auto seed : seeds) {
    const std::string name = dataset_file_name(seed);
    write_trajectory(out_dir / name, generate_trajectory(cfg, seed), cfg.scheme);
    m.files.push_back(name);
  }
  write_manifest(out_dir / "manifest.json", m);
  return m;
}

}  // namespace trajproj
