#pragma once

#include "routeshape/harness.hpp"
