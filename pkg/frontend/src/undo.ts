// Bounded snapshot-based undo/redo.
export class UndoStack<T> {
  private undoStack: T[] = [];
  private redoStack: T[] = [];

  constructor(
    private readonly clone: (state: T) => T,
    private readonly maxDepth = 50,
  ) {}

  push(state: T): void {
    this.undoStack.push(this.clone(state));
    if (this.undoStack.length > this.maxDepth) {
      this.undoStack.shift();
    }
    this.redoStack = [];
  }

  undo(current: T): T | null {
    const prev = this.undoStack.pop();
    if (prev === undefined) return null;
    this.redoStack.push(this.clone(current));
    return prev;
  }

  redo(current: T): T | null {
    const next = this.redoStack.pop();
    if (next === undefined) return null;
    this.undoStack.push(this.clone(current));
    return next;
  }

  get canUndo(): boolean {
    return this.undoStack.length > 0;
  }

  get canRedo(): boolean {
    return this.redoStack.length > 0;
  }

  get depth(): number {
    return this.undoStack.length;
  }
}
