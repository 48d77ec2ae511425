#include "cli_app.hpp"

int main(int argc, char** argv) { return vknng::cli::run(argc, argv); }
