import os

os.environ.setdefault("LATTICEQ_SETTINGS_MODULE", "config.profiles.test")
