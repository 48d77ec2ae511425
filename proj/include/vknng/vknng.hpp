#pragma once

#include "vknng/core.hpp"
#include "vknng/construct.hpp"
#include "vknng/spectral.hpp"
#include "vknng/pointcloud.hpp"
#include "vknng/experiment.hpp"
