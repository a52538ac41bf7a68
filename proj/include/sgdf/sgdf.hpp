#pragma once

// Umbrella header.

#include <sgdf/config.hpp>
#include <sgdf/constitutive.hpp>
#include <sgdf/diagnostics.hpp>
#include <sgdf/errors.hpp>
#include <sgdf/gravity.hpp>
#include <sgdf/grid.hpp>
#include <sgdf/integrator.hpp>
#include <sgdf/io.hpp>
#include <sgdf/kinematics.hpp>
#include <sgdf/linalg.hpp>
#include <sgdf/mixture.hpp>
#include <sgdf/model.hpp>
#include <sgdf/runner.hpp>
#include <sgdf/scenario.hpp>
