#! /usr/bin/env python
# -*- coding: utf-8 -*-

"""
Module that contains the factory used to collect estimation methods, either registered directly as classes or
discovered in Python files found under registered folders
"""

from __future__ import print_function, division, absolute_import

import os
import re
import sys
import uuid
import inspect
import logging
import importlib
import importlib.util

from hdsurv.libs.coxinfer.core import consts

logger = logging.getLogger(consts.LIB_ID)


class MethodFactory(object):

    class LoadingMechanism(object):
        """
        Class that contains variables used to define how the methods on a registered path should be loaded
        """

        # Tries IMPORTABLE first and falls back to LOAD_SOURCE when the file is not importable from sys.path
        GUESS = 0

        # Loads the file from its source under a unique module name. Relative imports are not available
        LOAD_SOURCE = 1

        # Imports the file through its dotted path; the file must live under a sys.path entry
        IMPORTABLE = 2

    # Regex validator for method folder directories
    REGEX_FOLDER_VALIDATOR = re.compile('^((?!__pycache__).)*$')

    # Regex validator for method file names
    REGEX_FILE_VALIDATOR = re.compile(r'([a-zA-Z].*)(\.py$)')

    DEFAULT_PACKAGE = 'hdsurv'

    def __init__(self, interface, paths=None, package_name=None, method_id='ID', env_var=None):
        """

        :param interface: class, base class every discovered method must inherit from
        :param paths: list(str), absolute paths to search for methods
        :param package_name: str, package registered methods belong to
        :param method_id: str, class attribute (or function) holding the method identifier. Falls back to the
            class name when the attribute is missing
        :param env_var: str, optional environment variable holding paths separated by the OS path separator
        """

        self._interface = interface
        self._method_identifier = method_id

        self._methods = dict()
        self._registered_paths = dict()

        self.register_paths(paths, package_name=package_name)
        if env_var:
            self.register_paths_from_env_var(env_var, package_name=package_name)

    def __repr__(self):
        return '[{} - Identifier: {}, Method Count: {}]'.format(
            self.__class__.__name__, self._method_identifier, sum(len(item) for item in self._methods.values()))

    # ============================================================================================================
    # BASE
    # ============================================================================================================

    def register_path(self, path, package_name=None, mechanism=LoadingMechanism.GUESS):
        """
        Registers a search path and collects every method class defined in the Python files found under it
        :param path: str, absolute folder path
        :param package_name: str
        :param mechanism: LoadingMechanism
        :return: int, amount of newly registered methods
        """

        if not path or not os.path.isdir(path):
            return 0

        package_name = package_name or self.DEFAULT_PACKAGE
        self._registered_paths.setdefault(package_name, dict())[path] = mechanism

        current_count = len(self._methods.get(package_name, list()))

        file_paths = list()
        for root, _, files in os.walk(path):
            if not self.REGEX_FOLDER_VALIDATOR.match(root):
                continue
            for file_name in sorted(files):
                if not self.REGEX_FILE_VALIDATOR.match(file_name):
                    continue
                if file_name.startswith('test') or file_name in ['setup.py', '__init__.py']:
                    continue
                file_paths.append(os.path.normpath(os.path.join(root, file_name)))

        for file_path in sorted(file_paths):
            module_to_inspect = None
            if mechanism in (self.LoadingMechanism.IMPORTABLE, self.LoadingMechanism.GUESS):
                module_to_inspect = self._mechanism_import(file_path)
            if not module_to_inspect and mechanism in (
                    self.LoadingMechanism.LOAD_SOURCE, self.LoadingMechanism.GUESS):
                module_to_inspect = self._mechanism_load(file_path)
            if not module_to_inspect:
                continue

            for _, item in inspect.getmembers(module_to_inspect, inspect.isclass):
                if item is self._interface or not issubclass(item, self._interface):
                    continue
                if inspect.isabstract(item):
                    continue
                item.ROOT = path
                item.PATH = file_path
                self._add(package_name, item)

        return len(self._methods.get(package_name, list())) - current_count

    def register_paths(self, paths, package_name=None, mechanism=LoadingMechanism.GUESS):
        """
        Registers the given paths within the factory
        :param paths: str or list(str)
        :return: int, amount of newly registered methods
        """

        if not paths:
            return 0
        if isinstance(paths, str):
            paths = [paths]

        total = 0
        visited = set()
        for path in paths:
            if not path:
                continue
            base_name = os.path.normpath(path)
            if base_name in visited:
                continue
            visited.add(base_name)
            total += self.register_path(path, package_name=package_name, mechanism=mechanism)

        return total

    def register_paths_from_env_var(self, env_var, package_name=None, mechanism=LoadingMechanism.GUESS):
        paths = [path for path in os.environ.get(env_var, '').split(os.pathsep) if path]
        return self.register_paths(paths, package_name=package_name, mechanism=mechanism)

    def register_method_from_class(self, method_class, package_name=None):
        """
        Registers the given class as a method. It must inherit from the factory interface
        :param method_class: type
        :param package_name: str
        :return: bool, True if the class was registered
        """

        if not inspect.isclass(method_class) or not issubclass(method_class, self._interface):
            return False

        self._add(package_name or self.DEFAULT_PACKAGE, method_class)

        return True

    def paths(self, package_name=None):
        return list(self._registered_paths.get(package_name or self.DEFAULT_PACKAGE, dict()).keys())

    def identifiers(self, package_name=None):
        """
        Returns the unique identifiers of the registered methods, in registration order
        :return: list(str)
        """

        if package_name:
            methods = self._methods.get(package_name, list())
        else:
            methods = [method for items in self._methods.values() for method in items]

        identifiers = list()
        for method in methods:
            identifier = self._get_identifier(method)
            if identifier not in identifiers:
                identifiers.append(identifier)

        return identifiers

    def methods(self, package_name=None):
        return [self.get_method_from_id(
            identifier, package_name=package_name) for identifier in self.identifiers(package_name=package_name)]

    def get_method_from_id(self, method_id, package_name=None):
        """
        Retrieves the method registered with the given identifier. When several classes share it the most recently
        registered one wins, so user methods can replace built-ins
        :param method_id: str
        :param package_name: str
        :return: type or None
        """

        if package_name and package_name not in self._methods:
            logger.error('Impossible to retrieve method "{}": package "{}" not registered!'.format(
                method_id, package_name))
            return None

        packages = [package_name] if package_name else list(self._methods.keys())
        matching = [
            method for name in packages for method in self._methods.get(name, list())
            if self._get_identifier(method) == method_id]
        if not matching:
            logger.warning('No method with id "{}" found in package "{}"'.format(method_id, package_name))
            return None

        return matching[-1]

    def reload(self):
        """
        Clears all registered methods and searches every registered path again
        """

        registered_paths = {name: dict(items) for name, items in self._registered_paths.items()}
        self.clear()
        for package_name, paths in registered_paths.items():
            for path, mechanism in paths.items():
                self.register_path(path, package_name=package_name, mechanism=mechanism)

    def clear(self):
        self._methods.clear()
        self._registered_paths.clear()

    # ============================================================================================================
    # INTERNAL
    # ============================================================================================================

    def _add(self, package_name, method_class):
        methods = self._methods.setdefault(package_name, list())
        if method_class not in methods:
            methods.append(method_class)

    def _mechanism_import(self, file_path):
        """
        Internal function that imports the module through the dotted path derived from the longest sys.path
        entry containing the file
        :param file_path: str
        :return: module or None
        """

        file_path = os.path.normpath(os.path.abspath(file_path))
        roots = sorted(
            (os.path.normpath(os.path.abspath(entry)) for entry in sys.path if entry), key=len, reverse=True)
        for root in roots:
            if not file_path.startswith(root + os.sep):
                continue
            relative = os.path.splitext(os.path.relpath(file_path, root))[0]
            parts = relative.split(os.sep)
            package_dir = root
            for part in parts[:-1]:
                package_dir = os.path.join(package_dir, part)
                if not os.path.isfile(os.path.join(package_dir, '__init__.py')):
                    break
            else:
                module_name = '.'.join(parts)
                if module_name in sys.modules:
                    return sys.modules[module_name]
                try:
                    return importlib.import_module(module_name)
                except Exception:
                    logger.debug('Impossible to import "{}"'.format(module_name), exc_info=True)
                    return None

        return None

    def _mechanism_load(self, file_path):
        """
        Internal function that loads the module directly from its source under a unique name
        :param file_path: str
        :return: module or None
        """

        module_name = 'hdsurv_method_{}'.format(uuid.uuid4().hex)
        try:
            spec = importlib.util.spec_from_file_location(module_name, file_path)
            module = importlib.util.module_from_spec(spec)
            spec.loader.exec_module(module)
        except Exception:
            logger.debug('Impossible to load source "{}"'.format(file_path), exc_info=True)
            return None
        sys.modules[module_name] = module

        return module

    def _get_identifier(self, method):
        identifier = getattr(method, self._method_identifier, None)
        if identifier is None:
            return method.__name__
        if inspect.isfunction(identifier) or inspect.ismethod(identifier):
            return identifier()

        return identifier
