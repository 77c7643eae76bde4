#pragma once

#include "milv/pipeline.hpp"
#include "milv/synthgen.hpp"
