#pragma once

#include <cstdint>
#include <vector>

#include "kiw/field.hpp"

namespace kiw {

FieldPtr zero_field(Valence valence, int dim);
FieldPtr constant_field(Valence valence, int dim, const Vec& components);
// dx^axis as a constant 1-form.
FieldPtr coordinate_form(int dim, int axis);

// Vector fields.
FieldPtr linear_vector_field(const Mat& A, const Vec& c);
FieldPtr rotation_field(double rate);
FieldPtr shear_field(double rate);
FieldPtr dilation_field(int dim, double rate);
// c * x^p on R^1.
FieldPtr power_field(double c, int p);
// X^i = base_i + amp * sin(2 pi x^{i+1} + phase_i); periodic with period 1.
FieldPtr periodic_vector_field(int dim, double amp, const Vec& base, const Vec& phase);
// Infinitesimal rotation of S^2 with angular velocity (wx, wy, wz), written
// in stereographic coordinates of each chart.
FieldPtr sphere_rotation_field(double wx, double wy, double wz);

// Tensor fields. coeffs has one row per component and one column per
// monomial of JetLayout::get(dim, degree).
FieldPtr polynomial_field(Valence valence, int dim, int degree, const Mat& coeffs);
// Component f: offset_f + amp_f sin(wave_f . x + phase_f).
FieldPtr trig_field(Valence valence, int dim, const Vec& offset, const Vec& amp, const Mat& wave,
                    const Vec& phase);
FieldPtr random_polynomial_field(Valence valence, int dim, int degree, std::uint64_t seed,
                                 double scale = 1.0);
FieldPtr random_trig_field(Valence valence, int dim, std::uint64_t seed, double scale = 1.0,
                           double max_wave = 2.0);
// Trigonometric field with integer multiples of 2 pi as wave numbers.
FieldPtr random_periodic_field(Valence valence, int dim, std::uint64_t seed, double scale = 1.0);
// Scalar a.P + P^T Q P of the ambient point P in R^3 on the sphere.
FieldPtr sphere_function(const Vec& a, const Mat& Q);

// Combinators.
FieldPtr gradient_form(FieldPtr scalar);
FieldPtr tensor_product(FieldPtr A, FieldPtr B);
FieldPtr linear_combination(std::vector<FieldPtr> fields, std::vector<double> weights);
FieldPtr time_modulated(FieldPtr field, TimeProfile profile);
// Same components, declared to have only `smoothness` derivatives.
FieldPtr with_smoothness(FieldPtr field, int smoothness);

}  // namespace kiw
