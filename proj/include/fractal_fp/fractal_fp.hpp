#pragma once

#include "fractal_fp/calculus.hpp"
#include "fractal_fp/curve.hpp"
#include "fractal_fp/errors.hpp"
#include "fractal_fp/kinetics.hpp"
#include "fractal_fp/mass_staircase.hpp"
#include "fractal_fp/numerics.hpp"
#include "fractal_fp/observables.hpp"
