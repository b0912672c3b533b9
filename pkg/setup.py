#!/usr/bin/env python3
"""
Setup script for the invariant engine
Checks the interpreter, installs dependencies and builds a first database
"""

import os
import subprocess
import sys

from create_env import create_env_file


def check_python_version():
    """Check if Python version is compatible"""
    if sys.version_info < (3, 8):
        print("❌ Python 3.8 or higher is required")
        return False
    print(f"✅ Python {sys.version_info.major}.{sys.version_info.minor} detected")
    return True


def install_dependencies():
    """Install required dependencies"""
    print("\n📦 Installing dependencies...")
    try:
        subprocess.check_call([sys.executable, "-m", "pip", "install", "-r", "requirements.txt"])
        print("✅ Dependencies installed successfully")
        return True
    except subprocess.CalledProcessError as e:
        print(f"❌ Failed to install dependencies: {e}")
        return False


def check_imports():
    """Check that the computational stack imports"""
    missing = []
    for module in ("numpy", "sympy", "psutil", "dotenv"):
        try:
            __import__(module)
        except ImportError:
            missing.append(module)
    if missing:
        print(f"❌ Missing modules: {', '.join(missing)}")
        return False
    print("✅ numpy, sympy, psutil and python-dotenv available")
    return True


def build_small_database(max_order=6):
    """Build the database up to a small order so simplify works out of the box"""
    print(f"\n🔧 Building invariant database up to order {max_order}...")
    try:
        subprocess.check_call([sys.executable, os.path.join("src", "main.py"), "build", str(max_order)])
        return True
    except subprocess.CalledProcessError as e:
        print(f"❌ Database build failed: {e}")
        return False


def create_directories():
    """Create necessary directories"""
    for directory in ("logs", "db"):
        os.makedirs(directory, exist_ok=True)
    print("✅ Created necessary directories")


def main():
    """Main setup function"""
    print("📐 Invariant Engine Setup")
    print("=" * 40)

    if not check_python_version():
        return False

    create_directories()

    if not install_dependencies() or not check_imports():
        return False

    if not create_env_file():
        return False

    build_small_database()

    print("\n🎉 Setup completed!")
    print("\nNext steps:")
    print("1. Edit .env file to configure your settings")
    print("2. Run: python src/main.py build 8 --dual   (larger database)")
    print("3. Run: python src/main.py simplify \"R[a,b,c,d]*R[-a,-c,-b,-d]\"")

    return True


if __name__ == "__main__":
    success = main()
    sys.exit(0 if success else 1)
