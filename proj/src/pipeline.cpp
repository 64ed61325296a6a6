#include "cellpeel/pipeline.hpp"

#include <cmath>

#include "cellpeel/formats.hpp"
#include "cellpeel/volume_io.hpp"

namespace cellpeel {

Surface surface_from_string(const std::string& s) {
  if (s == "apical") return Surface::Apical;
  if (s == "basal") return Surface::Basal;
  throw InvalidArgument("peel", "surface must be 'apical' or 'basal', got '" + s + "'");
}

const char* to_string(Surface s) { return s == Surface::Apical ? "apical" : "basal"; }

PeelImage build_peel(const MaskVolume& mask, const IntensityVolume& raw, Surface surface, const ShellParams& params,
                     bool fill) {
  if (!(mask.dims() == raw.dims())) throw InvalidArgument("peel", "mask and raw stack dimensions differ");
  const auto& s = raw.meta.spacing;
  const bool anisotropic = std::abs(s.z - s.x) > 1e-9 * s.x;
  MaskVolume m = anisotropic ? resample_isotropic(mask) : mask;
  const IntensityVolume r = anisotropic ? resample_isotropic(raw) : raw;
  m.meta = r.meta;
  auto shells = shells_from_mask(m, params);
  const auto& shell = surface == Surface::Apical ? shells.apical : shells.basal;
  const auto thin = thin_shell(shell, &shells.distance, params.t);
  auto peel = project_peel(thin, r);
  return fill ? fill_holes(peel) : peel;
}

Segmentation segment_peel(const PeelImage& peel, const SegParams& params, const std::optional<SeedSet>& seeds) {
  const auto img = peel_intensity(peel);
  const auto domain = peel.used_region();
  Segmentation out;
  out.seeds = seeds ? *seeds : h_minima_seeds(img, params, domain);
  out.labels = seeded_watershed(img, out.seeds, params, domain);
  return out;
}

}  // namespace cellpeel
