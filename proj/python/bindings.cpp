#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cellpeel/cli.hpp"
#include "cellpeel/formats.hpp"
#include "cellpeel/pipeline.hpp"
#include "cellpeel/tracking.hpp"

namespace py = pybind11;
using namespace cellpeel;

namespace {

template <typename T>
using Array = py::array_t<T, py::array::c_style | py::array::forcecast>;

// numpy arrays are (z, y, x), which is the x-fastest layout used here
template <typename T>
Grid3<T> to_grid(const Array<T>& a, const std::array<double, 3>& spacing = {1, 1, 1}) {
  if (a.ndim() != 3) throw InvalidArgument("volume-io", "expected a 3D array indexed (z, y, x)");
  VolumeMeta m{{std::size_t(a.shape(2)), std::size_t(a.shape(1)), std::size_t(a.shape(0))},
               {spacing[0], spacing[1], spacing[2]},
               std::nullopt};
  Grid3<T> g(m);
  std::copy(a.data(), a.data() + a.size(), g.data.begin());
  return g;
}

template <typename T>
py::array_t<T> from_grid(const Grid3<T>& g) {
  const auto& d = g.dims();
  py::array_t<T> out({d.nz, d.ny, d.nx});
  std::copy(g.data.begin(), g.data.end(), out.mutable_data());
  return out;
}

template <typename T>
py::array_t<T> from_image(const std::vector<T>& data, std::size_t w, std::size_t h) {
  py::array_t<T> out({h, w});
  std::copy(data.begin(), data.end(), out.mutable_data());
  return out;
}

MaskVolume binary(const Array<std::uint8_t>& a) {
  auto m = to_grid<std::uint8_t>(a);
  for (auto& v : m.data) v = v != 0;
  return m;
}

py::dict peel_dict(const PeelImage& p) {
  py::dict d;
  d["intensity"] = from_image(p.intensity, p.width, p.height);
  d["metric"] = from_image(p.metric, p.width, p.height);
  d["valid"] = from_image(p.valid, p.width, p.height);
  d["row_length"] = p.row_length;
  d["first_slice"] = p.first_slice;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Shell extraction, peeling, segmentation and tracking for cylindrical epithelia.";

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<ComputeError>(m, "ComputeError", PyExc_RuntimeError);

  m.def(
      "distance_map",
      [](const Array<std::uint8_t>& mask, bool open_y) {
        EdmBoundary b;
        b.y_closed = !open_y;
        return from_grid(euclidean_distance_map(binary(mask), b));
      },
      py::arg("mask"), py::arg("open_y") = false,
      "Distance from each foreground voxel to the nearest background voxel. Faces count as background unless open.");

  m.def(
      "shells",
      [](const Array<std::uint8_t>& mask, double t, double tol, int connectivity) {
        const auto s = shells_from_mask(binary(mask), ShellParams{t, tol, connectivity});
        return py::make_tuple(from_grid(s.apical), from_grid(s.basal));
      },
      py::arg("mask"), py::arg("t") = 5.0, py::arg("tol") = 0.5, py::arg("connectivity") = 26,
      "(apical, basal) shells at distance t +- tol inside the mask.");

  m.def(
      "mask_from_annotations",
      [](const std::string& annotations_json, std::array<double, 3> spacing) {
        const auto set = annotations_from_json(nlohmann::json::parse(annotations_json));
        return from_grid(interpolate_masks(set, Spacing{spacing[0], spacing[1], spacing[2]}));
      },
      py::arg("annotations_json"), py::arg("spacing") = std::array<double, 3>{1, 1, 1});

  m.def(
      "peel",
      [](const Array<std::uint8_t>& mask, const Array<std::uint16_t>& raw, const std::string& surface, double t,
         double tol, bool fill, int bits) {
        IntensityVolume v;
        static_cast<Grid3<std::uint16_t>&>(v) = to_grid<std::uint16_t>(raw);
        v.bits = bits;
        return peel_dict(build_peel(binary(mask), v, surface_from_string(surface), ShellParams{t, tol, 26}, fill));
      },
      py::arg("mask"), py::arg("raw"), py::arg("surface") = "apical", py::arg("t") = 5.0, py::arg("tol") = 0.5,
      py::arg("fill") = true, py::arg("bits") = 16);

  m.def(
      "segment",
      [](const Array<double>& image, double h, int connectivity, bool invert) {
        if (image.ndim() != 2) throw InvalidArgument("segment2d", "expected a 2D array");
        Image2D<double> img(image.shape(1), image.shape(0));
        std::copy(image.data(), image.data() + image.size(), img.data.begin());
        const SegParams p{h, connectivity, invert};
        const auto seeds = h_minima_seeds(img, p);
        const auto labels = seeded_watershed(img, seeds, p);
        std::vector<std::tuple<std::size_t, std::size_t, std::uint32_t>> s;
        for (const auto& seed : seeds.seeds) s.emplace_back(seed.row, seed.col, seed.label);
        return py::make_tuple(from_image(labels.data, labels.width, labels.height), s);
      },
      py::arg("image"), py::arg("h") = 2.0, py::arg("connectivity") = 4, py::arg("invert") = false,
      "h-minima seeded watershed; returns (labels, [(row, col, label)]).");

  m.def(
      "track_3d",
      [](const std::vector<Array<std::uint32_t>>& frames) {
        std::vector<LabelVolume> vols;
        for (const auto& f : frames) vols.push_back(to_grid<std::uint32_t>(f));
        const auto t = track_3d_overlap(vols);
        py::list rows;
        for (const auto& r : t.rows) {
          py::dict d;
          d["track_id"] = r.track_id;
          d["frame"] = r.frame;
          d["label"] = r.label;
          d["status"] = to_string(r.status);
          rows.append(d);
        }
        return rows;
      },
      py::arg("frames"), "Largest-overlap correspondences; track IDs are first-frame labels.");

  m.def(
      "run",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_subcommand(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run a command line subcommand; returns (exit_code, stdout, stderr).");
}
