from conan import ConanFile
from conan.tools.cmake import cmake_layout


class DemoAppConan(ConanFile):
    name = "demo-app"
    version = "0.4.0"
    settings = "os", "compiler", "build_type", "arch"
    generators = "CMakeDeps", "CMakeToolchain"
    requires = (
        "fmt/10.1.1",
        "spdlog/1.12.0",
    )

    def requirements(self):
        self.requires("nlohmann_json/3.11.2")
        self.tool_requires("cmake/3.27.7")

    def layout(self):
        cmake_layout(self)
