from __future__ import annotations

import logging
from abc import ABCMeta
from typing import Callable

import torch.nn as nn


InitFn = Callable[[nn.Module], None]


class BaseModule(nn.Module, metaclass=ABCMeta):
    """``nn.Module`` with an idempotent, recursive ``init_weights``.

    Children are initialised first, then the module's own layers through
    :meth:`_init_weights`, then ``init_cfg``. A second call is a no-op.

    Args:
        init_cfg (InitFn | list[InitFn] | None, optional): extra initialisers
            applied to the whole module after its children. Defaults to None.
    """

    def __init__(self, init_cfg: InitFn | list[InitFn] | None = None) -> None:
        super().__init__()

        self._is_init = False
        self.init_cfg = init_cfg

    @property
    def is_init(self) -> bool:
        return self._is_init

    def _init_weights(self) -> None:
        """Initialises layers owned directly by this module."""

    def init_weights(self) -> None:
        logger = logging.getLogger(name="module_init")
        if self._is_init:
            logger.warning(
                f"init_weights of {self.__class__.__name__} has been called more than once"
            )
            return

        for m in self.children():
            if isinstance(m, BaseModule) and not m.is_init:
                m.init_weights()
        self._init_weights()

        if self.init_cfg is not None:
            initializers = (
                self.init_cfg
                if isinstance(self.init_cfg, (list, tuple))
                else [self.init_cfg]
            )
            logger.debug(
                f"initialize {self.__class__.__name__} with {len(initializers)} init_cfg entries"
            )
            for initializer in initializers:
                initializer(self)

        self._is_init = True


class ModuleList(BaseModule, nn.ModuleList):
    def __init__(self, modules=None, init_cfg=None) -> None:
        BaseModule.__init__(self, init_cfg=init_cfg)
        nn.ModuleList.__init__(self, modules=modules)
