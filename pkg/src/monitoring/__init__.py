from .loop_monitor import LoopMonitor, OperationRecord

__all__ = ['LoopMonitor', 'OperationRecord']
