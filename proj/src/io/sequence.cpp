#include "gsmap/io/sequence.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "gsmap/core/projection.hpp"
#include "gsmap/io/png_io.hpp"

namespace fs = std::filesystem;

namespace gsmap {

namespace {

std::string frame_name(const char* dir, int i, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s/%06d.%s", dir, i, ext);
    return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& s, const std::string& context) {
    try {
        size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("malformed number '" + s + "' in " + context);
    }
}

std::vector<ColoredPoint> read_ply(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open cloud file " + path);
    std::string line;
    size_t count = 0;
    bool header_done = false;
    std::vector<std::string> properties;
    while (std::getline(in, line)) {
        if (line == "end_header") {
            header_done = true;
            break;
        }
        auto tok = split(line, ' ');
        if (tok.size() == 3 && tok[0] == "element" && tok[1] == "vertex")
            count = static_cast<size_t>(std::stoull(tok[2]));
        if (tok.size() == 3 && tok[0] == "property") properties.push_back(tok[2]);
    }
    if (!header_done) throw std::runtime_error("missing end_header in " + path);
    const std::vector<std::string> expected = {"x", "y", "z", "red", "green", "blue"};
    if (properties != expected)
        throw std::runtime_error("unexpected vertex properties in " + path +
                                 " (want x y z red green blue)");
    std::vector<ColoredPoint> out;
    out.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        if (!std::getline(in, line))
            throw std::runtime_error("truncated vertex list in " + path);
        auto tok = split(line, ' ');
        if (tok.size() != 6)
            throw std::runtime_error("malformed vertex row in " + path + ": '" + line + "'");
        ColoredPoint p;
        p.position = Eigen::Vector3d(parse_double(tok[0], path), parse_double(tok[1], path),
                                     parse_double(tok[2], path));
        p.color = Eigen::Vector3d(parse_double(tok[3], path), parse_double(tok[4], path),
                                  parse_double(tok[5], path)) /
                  255.0;
        out.push_back(p);
    }
    return out;
}

void write_ply(const std::string& path, const std::vector<ColoredPoint>& points) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write cloud file " + path);
    out << "ply\nformat ascii 1.0\nelement vertex " << points.size()
        << "\nproperty double x\nproperty double y\nproperty double z"
        << "\nproperty uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
    for (const auto& p : points) {
        out << format_double(p.position.x()) << ' ' << format_double(p.position.y()) << ' '
            << format_double(p.position.z());
        for (int c = 0; c < 3; ++c)
            out << ' ' << static_cast<int>(std::lround(std::clamp(p.color[c], 0.0, 1.0) * 255.0));
        out << '\n';
    }
}

} // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

SequenceReader::SequenceReader(const std::string& path) {
    manifest_.root = path;
    const fs::path root(path);
    if (!fs::exists(root / "manifest"))
        throw std::runtime_error("no manifest in sequence directory " + path);

    std::ifstream mf(root / "manifest");
    std::string line;
    while (std::getline(mf, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream is(line);
        std::string key;
        is >> key;
        if (key == "fx") is >> manifest_.camera.fx;
        else if (key == "fy") is >> manifest_.camera.fy;
        else if (key == "cx") is >> manifest_.camera.cx;
        else if (key == "cy") is >> manifest_.camera.cy;
        else if (key == "width") is >> manifest_.camera.width;
        else if (key == "height") is >> manifest_.camera.height;
        else if (key == "gt_depth_dir") manifest_.has_gt_depth = true;
        else if (key == "gt_map") is >> manifest_.gt_map_file;
    }
    manifest_.camera.validate();

    std::ifstream pf(root / "poses.csv");
    if (!pf) throw std::runtime_error("missing poses.csv in " + path);
    int i = 0;
    while (std::getline(pf, line)) {
        if (line.empty()) continue;
        auto tok = split(line, ',');
        if (tok.size() != 8)
            throw std::runtime_error("malformed pose row " + std::to_string(i) + " in " + path +
                                     ": '" + line + "'");
        const std::string ctx = "poses.csv row " + std::to_string(i);
        const double t = parse_double(tok[0], ctx);
        if (!timestamps_.empty() && t <= timestamps_.back())
            throw std::runtime_error("non-monotonic timestamp at " + ctx);
        timestamps_.push_back(t);
        Eigen::Quaterniond q(parse_double(tok[1], ctx), parse_double(tok[2], ctx),
                             parse_double(tok[3], ctx), parse_double(tok[4], ctx));
        Eigen::Vector3d tr(parse_double(tok[5], ctx), parse_double(tok[6], ctx),
                           parse_double(tok[7], ctx));
        poses_.emplace_back(q, tr);
        ++i;
    }
    manifest_.frame_count = i;

    for (int f = 0; f < manifest_.frame_count; ++f) {
        const auto img = root / frame_name("images", f, "png");
        const auto ply = root / frame_name("clouds", f, "ply");
        if (!fs::exists(img)) throw std::runtime_error("missing image file " + img.string());
        if (!fs::exists(ply)) throw std::runtime_error("missing cloud file " + ply.string());
        if (manifest_.has_gt_depth) {
            const auto d = root / frame_name("depth", f, "bin");
            if (!fs::exists(d)) throw std::runtime_error("missing depth file " + d.string());
        }
    }
}

Frame SequenceReader::read_frame(int i) const {
    if (i < 0 || i >= manifest_.frame_count)
        throw std::out_of_range("read_frame: index out of range");
    Frame f;
    f.index = i;
    f.timestamp = timestamps_[i];
    f.pose = poses_[i];
    const fs::path root(manifest_.root);
    f.color = read_png_rgb((root / frame_name("images", i, "png")).string());
    if (f.color.height() != manifest_.camera.height || f.color.width() != manifest_.camera.width)
        throw std::runtime_error("image size mismatch in frame " + std::to_string(i));
    f.cloud = read_ply((root / frame_name("clouds", i, "ply")).string());
    for (auto& p : f.cloud) p.timestamp = f.timestamp;
    return f;
}

ImageD SequenceReader::read_gt_depth(int i) const {
    if (!manifest_.has_gt_depth)
        throw std::runtime_error("sequence has no ground-truth depth");
    const fs::path p = fs::path(manifest_.root) / frame_name("depth", i, "bin");
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    ImageD img(manifest_.camera.height, manifest_.camera.width, 1);
    in.read(reinterpret_cast<char*>(img.data()), img.size() * sizeof(double));
    if (!in) throw std::runtime_error("truncated depth file " + p.string());
    return img;
}

void write_sequence(const std::string& path, const CameraModel& cam,
                    const std::vector<Frame>& frames, const std::vector<ImageD>* gt_depths,
                    const std::string& gt_map_file) {
    cam.validate();
    const fs::path root(path);
    fs::create_directories(root / "images");
    fs::create_directories(root / "clouds");
    if (gt_depths) fs::create_directories(root / "depth");

    {
        std::ofstream mf(root / "manifest");
        if (!mf) throw std::runtime_error("cannot write manifest in " + path);
        mf << "fx " << format_double(cam.fx) << "\nfy " << format_double(cam.fy) << "\ncx "
           << format_double(cam.cx) << "\ncy " << format_double(cam.cy) << "\nwidth "
           << cam.width << "\nheight " << cam.height << '\n';
        if (gt_depths) mf << "gt_depth_dir depth\n";
        if (!gt_map_file.empty()) mf << "gt_map " << gt_map_file << '\n';
    }
    {
        std::ofstream pf(root / "poses.csv");
        for (const auto& f : frames) {
            const auto& q = f.pose.rotation;
            const auto& t = f.pose.translation;
            pf << format_double(f.timestamp) << ',' << format_double(q.w()) << ','
               << format_double(q.x()) << ',' << format_double(q.y()) << ','
               << format_double(q.z()) << ',' << format_double(t.x()) << ','
               << format_double(t.y()) << ',' << format_double(t.z()) << '\n';
        }
    }
    for (const auto& f : frames) {
        write_png_rgb((root / frame_name("images", f.index, "png")).string(), f.color);
        write_ply((root / frame_name("clouds", f.index, "ply")).string(), f.cloud);
    }
    if (gt_depths) {
        for (size_t i = 0; i < gt_depths->size(); ++i) {
            std::ofstream df(root / frame_name("depth", static_cast<int>(i), "bin"),
                             std::ios::binary);
            df.write(reinterpret_cast<const char*>((*gt_depths)[i].data()),
                     (*gt_depths)[i].size() * sizeof(double));
        }
    }
}

ImageD project_sparse_depth(std::span<const ColoredPoint> points, const Pose& pose,
                            const CameraModel& cam) {
    ImageD depth(cam.height, cam.width, 1, 0.0);
    for (const ColoredPoint& p : points) {
        const Eigen::Vector3d pc = pose.world_to_camera(p.position);
        if (pc.z() <= kNearClip) continue;
        const long px = std::lround(cam.fx * pc.x() / pc.z() + cam.cx);
        const long py = std::lround(cam.fy * pc.y() / pc.z() + cam.cy);
        if (px < 0 || px >= cam.width || py < 0 || py >= cam.height) continue;
        double& d = depth.at(static_cast<int>(py), static_cast<int>(px));
        if (d == 0.0 || pc.z() < d) d = pc.z();
    }
    return depth;
}

} // namespace gsmap
