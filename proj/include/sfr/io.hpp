// File formats: point clouds as PLY (ascii or binary little-endian, x/y/z
// with optional nx/ny/nz) or whitespace XYZ text; meshes as OBJ (ascii,
// 1-based) or binary little-endian PLY; decoder weights as a flat
// little-endian binary ("NKSF" magic, version, S, D, hidden width, then the
// parameter matrices row-major in declared order) plus a readable text dump.
// All writes go through a temporary file and an atomic rename.
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sfr/core.hpp"
#include "sfr/decoder.hpp"
#include "sfr/mesher.hpp"
#include "sfr/pyramid.hpp"

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts need byte swaps");

namespace sfr {

namespace detail {

class AtomicWriter {
public:
    explicit AtomicWriter(const std::filesystem::path& path)
        : path_(path), tmp_(path.string() + ".tmp"), out_(tmp_, std::ios::binary) {
        if (!out_) throw ParseError("cannot open " + tmp_.string() + " for writing");
    }
    std::ofstream& stream() { return out_; }
    void commit() {
        out_.flush();
        if (!out_) throw ParseError("write failed for " + tmp_.string());
        out_.close();
        std::filesystem::rename(tmp_, path_);
    }
    ~AtomicWriter() {
        if (out_.is_open()) {
            out_.close();
            std::error_code ec;
            std::filesystem::remove(tmp_, ec);
        }
    }

private:
    std::filesystem::path path_;
    std::filesystem::path tmp_;
    std::ofstream out_;
};

template <typename T>
void write_raw(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in, const std::string& what, std::int64_t offset) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in)
        throw ParseError("truncated " + what + " at byte offset " +
                         std::to_string(offset));
    return v;
}

struct PlyProperty {
    std::string name;
    int byte_size = 0;   // 0 marks an ascii column of unknown width
    bool is_float = false;
    bool is_double = false;
};

}  // namespace detail

// Loads a point cloud. Format is picked by extension (.ply vs anything else
// as XYZ text) with a magic-byte fallback. Malformed records raise ParseError
// with a line (ascii) or byte-offset (binary) diagnostic. Normals are
// renormalized; deviations beyond 1e-3 from unit length append a warning.
inline PointCloud load_cloud(const std::filesystem::path& path,
                             std::vector<std::string>* warnings = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());

    std::string ext = path.extension().string();
    for (char& c : ext) c = char(std::tolower(c));
    char magic[3] = {0, 0, 0};
    in.read(magic, 3);
    in.seekg(0);
    const bool is_ply = ext == ".ply" || std::string_view(magic, 3) == "ply";

    PointCloud cloud;
    if (is_ply) {
        std::string line;
        int line_no = 0;
        auto next_line = [&]() {
            if (!std::getline(in, line))
                throw ParseError(path.string() + ": unexpected end of header at line " +
                                 std::to_string(line_no + 1));
            if (!line.empty() && line.back() == '\r') line.pop_back();
            ++line_no;
        };
        next_line();
        if (line != "ply") throw ParseError(path.string() + ":1: missing ply magic");

        bool binary = false;
        std::size_t vertex_count = 0;
        std::vector<detail::PlyProperty> props;
        bool in_vertex_element = false;
        bool saw_vertex = false;
        while (true) {
            next_line();
            std::istringstream ls(line);
            std::string word;
            ls >> word;
            if (word == "comment" || word == "obj_info" || word.empty()) continue;
            if (word == "format") {
                std::string fmt;
                ls >> fmt;
                if (fmt == "ascii") {
                    binary = false;
                } else if (fmt == "binary_little_endian") {
                    binary = true;
                } else {
                    throw UnsupportedFormatError(path.string() + ": ply format '" + fmt +
                                                 "' not supported");
                }
            } else if (word == "element") {
                std::string name;
                std::size_t count = 0;
                ls >> name >> count;
                if (name == "vertex") {
                    if (saw_vertex)
                        throw UnsupportedFormatError(path.string() +
                                                     ": multiple vertex elements");
                    saw_vertex = true;
                    in_vertex_element = true;
                    vertex_count = count;
                } else {
                    if (!saw_vertex)
                        throw UnsupportedFormatError(
                            path.string() + ": element '" + name +
                            "' precedes the vertex element; cannot skip it");
                    in_vertex_element = false;
                }
            } else if (word == "property") {
                if (!in_vertex_element) continue;  // trailing elements are ignored
                std::string type, name;
                ls >> type >> name;
                if (type == "list")
                    throw UnsupportedFormatError(path.string() +
                                                 ": list property in vertex element");
                detail::PlyProperty p;
                p.name = name;
                p.is_float = type == "float" || type == "float32";
                p.is_double = type == "double" || type == "float64";
                if (p.is_float) p.byte_size = 4;
                else if (p.is_double) p.byte_size = 8;
                else if (type == "char" || type == "uchar" || type == "int8" || type == "uint8") p.byte_size = 1;
                else if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") p.byte_size = 2;
                else if (type == "int" || type == "uint" || type == "int32" || type == "uint32") p.byte_size = 4;
                else
                    throw UnsupportedFormatError(path.string() + ": property type '" +
                                                 type + "' not supported");
                props.push_back(p);
            } else if (word == "end_header") {
                break;
            } else {
                throw ParseError(path.string() + ":" + std::to_string(line_no) +
                                 ": unrecognized header keyword '" + word + "'");
            }
        }
        if (!saw_vertex)
            throw ParseError(path.string() + ": header has no vertex element");

        int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1;
        for (std::size_t i = 0; i < props.size(); ++i) {
            if (props[i].name == "x") ix = int(i);
            else if (props[i].name == "y") iy = int(i);
            else if (props[i].name == "z") iz = int(i);
            else if (props[i].name == "nx") inx = int(i);
            else if (props[i].name == "ny") iny = int(i);
            else if (props[i].name == "nz") inz = int(i);
        }
        if (ix < 0 || iy < 0 || iz < 0)
            throw ParseError(path.string() + ": vertex element lacks x/y/z properties");
        const bool with_normals = inx >= 0 && iny >= 0 && inz >= 0;

        cloud.positions.resize(vertex_count);
        if (with_normals) cloud.normals.resize(vertex_count);

        if (binary) {
            const std::int64_t data_start = std::int64_t(in.tellg());
            std::size_t stride = 0;
            for (const auto& p : props) stride += std::size_t(p.byte_size);
            std::vector<char> record(stride);
            for (std::size_t v = 0; v < vertex_count; ++v) {
                in.read(record.data(), std::streamsize(stride));
                if (!in)
                    throw ParseError(path.string() + ": truncated vertex data at byte offset " +
                                     std::to_string(data_start + std::int64_t(v * stride)));
                std::size_t off = 0;
                std::vector<double> values(props.size(), 0.0);
                for (std::size_t p = 0; p < props.size(); ++p) {
                    if (props[p].is_float) {
                        float f;
                        std::memcpy(&f, record.data() + off, 4);
                        values[p] = double(f);
                    } else if (props[p].is_double) {
                        double d;
                        std::memcpy(&d, record.data() + off, 8);
                        values[p] = d;
                    }
                    off += std::size_t(props[p].byte_size);
                }
                cloud.positions[v] = {values[std::size_t(ix)], values[std::size_t(iy)],
                                      values[std::size_t(iz)]};
                if (with_normals)
                    cloud.normals[v] = {values[std::size_t(inx)], values[std::size_t(iny)],
                                        values[std::size_t(inz)]};
            }
        } else {
            for (std::size_t v = 0; v < vertex_count; ++v) {
                next_line();
                std::istringstream ls(line);
                std::vector<double> values(props.size(), 0.0);
                for (std::size_t p = 0; p < props.size(); ++p)
                    if (!(ls >> values[p]))
                        throw ParseError(path.string() + ":" + std::to_string(line_no) +
                                         ": malformed vertex record (column " +
                                         std::to_string(p + 1) + ")");
                cloud.positions[v] = {values[std::size_t(ix)], values[std::size_t(iy)],
                                      values[std::size_t(iz)]};
                if (with_normals)
                    cloud.normals[v] = {values[std::size_t(inx)], values[std::size_t(iny)],
                                        values[std::size_t(inz)]};
            }
        }
    } else {
        // Whitespace XYZ text: three columns per line, optionally six with
        // normals. Blank lines are skipped; anything else is malformed.
        std::string line;
        int line_no = 0;
        bool any_normals = false;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            std::istringstream ls(line);
            std::vector<double> cols;
            double value;
            while (ls >> value) cols.push_back(value);
            if (!ls.eof())
                throw ParseError(path.string() + ":" + std::to_string(line_no) +
                                 ": non-numeric token in column " +
                                 std::to_string(cols.size() + 1));
            if (cols.empty()) continue;
            if (cols.size() != 3 && cols.size() != 6)
                throw ParseError(path.string() + ":" + std::to_string(line_no) +
                                 ": expected 3 or 6 columns, got " +
                                 std::to_string(cols.size()));
            if (cols.size() == 6 ? (!any_normals && !cloud.positions.empty())
                                 : any_normals)
                throw ParseError(path.string() + ":" + std::to_string(line_no) +
                                 ": inconsistent normal columns");
            cloud.positions.push_back({cols[0], cols[1], cols[2]});
            if (cols.size() == 6) {
                any_normals = true;
                cloud.normals.push_back({cols[3], cols[4], cols[5]});
            }
        }
    }

    if (cloud.has_normals()) {
        // Unit check: normals inside the tolerance pass through untouched so
        // binary round trips stay bit-exact; the rest renormalize with a
        // warning.
        bool warned = false;
        for (Vec3& n : cloud.normals) {
            const double len = n.norm();
            if (std::abs(len - 1.0) <= 1e-3) continue;
            if (!warned && warnings)
                warnings->push_back(
                    "normals deviate from unit length by more than 1e-3; renormalized");
            warned = true;
            if (len > 0.0) n = n / len;
        }
    }
    return cloud;
}

// Binary little-endian PLY with double precision so save/load round trips are
// bit-exact; ascii mode is available for eyeballing.
inline void save_cloud_ply(const std::filesystem::path& path, const PointCloud& cloud,
                           bool binary = true) {
    detail::AtomicWriter writer(path);
    auto& out = writer.stream();
    out << "ply\n"
        << (binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n")
        << "element vertex " << cloud.size() << "\n"
        << "property double x\nproperty double y\nproperty double z\n";
    if (cloud.has_normals())
        out << "property double nx\nproperty double ny\nproperty double nz\n";
    out << "end_header\n";
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3& p = cloud.positions[i];
        if (binary) {
            detail::write_raw(out, p.x);
            detail::write_raw(out, p.y);
            detail::write_raw(out, p.z);
            if (cloud.has_normals()) {
                detail::write_raw(out, cloud.normals[i].x);
                detail::write_raw(out, cloud.normals[i].y);
                detail::write_raw(out, cloud.normals[i].z);
            }
        } else {
            out.precision(17);
            out << p.x << ' ' << p.y << ' ' << p.z;
            if (cloud.has_normals()) {
                const Vec3& n = cloud.normals[i];
                out << ' ' << n.x << ' ' << n.y << ' ' << n.z;
            }
            out << '\n';
        }
    }
    writer.commit();
}

inline void save_mesh_ply(const std::filesystem::path& path, const Mesh& mesh) {
    detail::AtomicWriter writer(path);
    auto& out = writer.stream();
    out << "ply\nformat binary_little_endian 1.0\n"
        << "element vertex " << mesh.vertices.size() << "\n"
        << "property double x\nproperty double y\nproperty double z\n"
        << "element face " << mesh.triangles.size() << "\n"
        << "property list uchar int vertex_indices\nend_header\n";
    for (const Vec3& v : mesh.vertices) {
        detail::write_raw(out, v.x);
        detail::write_raw(out, v.y);
        detail::write_raw(out, v.z);
    }
    for (const auto& t : mesh.triangles) {
        detail::write_raw<std::uint8_t>(out, 3);
        detail::write_raw(out, t[0]);
        detail::write_raw(out, t[1]);
        detail::write_raw(out, t[2]);
    }
    writer.commit();
}

// ASCII OBJ with 1-based indices.
inline void save_mesh_obj(const std::filesystem::path& path, const Mesh& mesh) {
    detail::AtomicWriter writer(path);
    auto& out = writer.stream();
    out.precision(17);
    for (const Vec3& v : mesh.vertices)
        out << "v " << v.x << ' ' << v.y << ' ' << v.z << '\n';
    for (const auto& t : mesh.triangles)
        out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
    writer.commit();
}

// Loads a mesh back from the binary PLY layout written by save_mesh_ply.
inline Mesh load_mesh_ply(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    std::string line;
    std::size_t vertices = 0, faces = 0;
    std::vector<std::string> vertex_props;
    bool in_vertex = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "element") {
            std::string name;
            std::size_t count;
            ls >> name >> count;
            if (name == "vertex") { vertices = count; in_vertex = true; }
            else { if (name == "face") faces = count; in_vertex = false; }
        } else if (word == "property" && in_vertex) {
            std::string type, name;
            ls >> type >> name;
            if (type != "double")
                throw UnsupportedFormatError(path.string() + ": mesh loader expects double vertices");
            vertex_props.push_back(name);
        } else if (word == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt != "binary_little_endian")
                throw UnsupportedFormatError(path.string() + ": mesh loader expects binary_little_endian");
        } else if (word == "end_header") {
            break;
        }
    }
    if (vertex_props.size() < 3)
        throw ParseError(path.string() + ": mesh vertex element lacks x/y/z");
    Mesh mesh;
    mesh.vertices.resize(vertices);
    for (std::size_t v = 0; v < vertices; ++v) {
        double vals[3];
        for (int c = 0; c < 3; ++c)
            vals[c] = detail::read_raw<double>(in, "mesh vertex", std::int64_t(in.tellg()));
        // Skip any extra double properties.
        for (std::size_t c = 3; c < vertex_props.size(); ++c)
            detail::read_raw<double>(in, "mesh vertex", std::int64_t(in.tellg()));
        mesh.vertices[v] = {vals[0], vals[1], vals[2]};
    }
    mesh.triangles.resize(faces);
    for (std::size_t f = 0; f < faces; ++f) {
        const auto n = detail::read_raw<std::uint8_t>(in, "face", std::int64_t(in.tellg()));
        if (n != 3) throw UnsupportedFormatError(path.string() + ": non-triangle face");
        for (int c = 0; c < 3; ++c)
            mesh.triangles[f][std::size_t(c)] =
                detail::read_raw<std::int32_t>(in, "face", std::int64_t(in.tellg()));
    }
    return mesh;
}

inline constexpr char kDecoderMagic[4] = {'N', 'K', 'S', 'F'};
inline constexpr std::uint32_t kDecoderVersion = 1;

inline void save_decoder(const std::filesystem::path& path, const DecoderParams& params) {
    detail::AtomicWriter writer(path);
    auto& out = writer.stream();
    out.write(kDecoderMagic, 4);
    detail::write_raw<std::uint32_t>(out, kDecoderVersion);
    detail::write_raw<std::uint32_t>(out, std::uint32_t(params.level_count()));
    detail::write_raw<std::uint32_t>(out, std::uint32_t(params.feature_dim));
    detail::write_raw<std::uint32_t>(out, std::uint32_t(params.hidden));
    const std::vector<double> flat = params.flatten();
    out.write(reinterpret_cast<const char*>(flat.data()),
              std::streamsize(flat.size() * sizeof(double)));
    writer.commit();
}

inline DecoderParams load_decoder(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kDecoderMagic, 4) != 0)
        throw ParseError(path.string() + ": bad decoder magic (want NKSF)");
    const auto version = detail::read_raw<std::uint32_t>(in, "decoder header", 4);
    if (version != kDecoderVersion)
        throw UnsupportedFormatError(path.string() + ": decoder version " +
                                     std::to_string(version) + " not supported");
    const auto levels = detail::read_raw<std::uint32_t>(in, "decoder header", 8);
    const auto feature_dim = detail::read_raw<std::uint32_t>(in, "decoder header", 12);
    const auto hidden = detail::read_raw<std::uint32_t>(in, "decoder header", 16);
    DecoderParams params =
        DecoderParams::zeros(int(feature_dim), int(levels), int(hidden));
    std::vector<double> flat(params.param_count());
    in.read(reinterpret_cast<char*>(flat.data()),
            std::streamsize(flat.size() * sizeof(double)));
    if (!in) throw ParseError(path.string() + ": truncated decoder payload");
    params.unflatten(flat);
    return params;
}

// Readable dump of the decoder for inspection.
inline void save_decoder_text(const std::filesystem::path& path,
                              const DecoderParams& params) {
    detail::AtomicWriter writer(path);
    auto& out = writer.stream();
    out.precision(17);
    out << "decoder levels=" << params.level_count() << " feature_dim=" << params.feature_dim
        << " hidden=" << params.hidden << "\n";
    int level = 0;
    auto dump = [&out](const std::string& name, const DenseLayer& l) {
        out << name << " W " << l.out << "x" << l.in << "\n";
        for (int o = 0; o < l.out; ++o) {
            for (int i = 0; i < l.in; ++i)
                out << l.W[std::size_t(o) * std::size_t(l.in) + std::size_t(i)]
                    << (i + 1 == l.in ? "" : " ");
            out << "\n";
        }
        out << name << " b " << l.out << "\n";
        for (int o = 0; o < l.out; ++o) out << l.b[std::size_t(o)] << (o + 1 == l.out ? "" : " ");
        out << "\n";
    };
    for (const auto& e : params.encoders) {
        dump("encoder" + std::to_string(level) + ".l1", e.l1);
        dump("encoder" + std::to_string(level) + ".l2", e.l2);
        ++level;
    }
    dump("sdf_head.hidden", params.sdf_head.hidden);
    dump("sdf_head.out", params.sdf_head.out);
    dump("mask_head.hidden", params.mask_head.hidden);
    dump("mask_head.out", params.mask_head.out);
    writer.commit();
}

}  // namespace sfr
