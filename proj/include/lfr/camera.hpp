#pragma once

#include "lfr/error.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>

namespace lfr {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

/// Rigid camera placement. `rotation` is camera-to-world; its columns are the
/// camera's right (+x), down (+y) and viewing (+z) axes in world coordinates.
struct CameraPose {
    Vec3 position = Vec3::Zero();
    Mat3 rotation = Mat3::Identity();

    Vec3 right() const { return rotation.col(0); }
    Vec3 down() const { return rotation.col(1); }
    Vec3 forward() const { return rotation.col(2); }

    Vec3 to_camera(const Vec3& world) const { return rotation.transpose() * (world - position); }
    Vec3 to_world(const Vec3& cam) const { return rotation * cam + position; }

    bool is_orthonormal(double tol = 1e-6) const {
        return (rotation.transpose() * rotation - Mat3::Identity()).norm() < tol && rotation.determinant() > 0;
    }

    /// Camera at `eye` looking at `target`; world +y is treated as "down" so the
    /// identity pose looks along +z with image y down.
    static CameraPose look_at(const Vec3& eye, const Vec3& target, const Vec3& world_down = Vec3::UnitY()) {
        const Vec3 fwd = (target - eye).normalized();
        Vec3 right = world_down.cross(fwd);
        if (right.norm() < 1e-12) throw GeometryError("look_at: view direction parallel to the down vector");
        right.normalize();
        CameraPose pose;
        pose.position = eye;
        pose.rotation.col(0) = right;
        pose.rotation.col(1) = fwd.cross(right);
        pose.rotation.col(2) = fwd;
        return pose;
    }

    friend bool operator==(const CameraPose& a, const CameraPose& b) {
        return a.position == b.position && a.rotation == b.rotation;
    }
};

/// Pinhole camera in pixel units. Pixel (px, py) has its centre at integer
/// coordinates, so the image spans [-0.5, width - 0.5].
struct PinholeCamera {
    CameraPose pose;
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 1;
    int height = 1;

    /// Centred camera with horizontal/vertical full fields of view in radians.
    static PinholeCamera from_fov(const CameraPose& pose, double fov_x, double fov_y, int width, int height) {
        PinholeCamera cam;
        cam.pose = pose;
        cam.width = width;
        cam.height = height;
        cam.fx = width / (2.0 * std::tan(0.5 * fov_x));
        cam.fy = height / (2.0 * std::tan(0.5 * fov_y));
        cam.cx = 0.5 * width - 0.5;
        cam.cy = 0.5 * height - 0.5;
        return cam;
    }

    /// Projects a camera-space point to pixel coordinates (z must be > 0).
    Vec2 project_camera(const Vec3& p) const { return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy}; }

    Vec2 project(const Vec3& world) const { return project_camera(pose.to_camera(world)); }

    /// Camera-space direction (z = 1) through a pixel position.
    Vec3 pixel_ray(double px, double py) const { return {(px - cx) / fx, (py - cy) / fy, 1.0}; }

    /// Signed normalized image coordinate, border at +-1.
    Vec2 pixel_to_ndc(const Vec2& px) const {
        return {(2.0 * px.x() + 1.0) / width - 1.0, (2.0 * px.y() + 1.0) / height - 1.0};
    }
    Vec2 ndc_to_pixel(const Vec2& ndc) const {
        return {0.5 * (ndc.x() + 1.0) * width - 0.5, 0.5 * (ndc.y() + 1.0) * height - 0.5};
    }
};

}  // namespace lfr
