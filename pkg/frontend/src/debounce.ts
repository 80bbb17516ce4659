// Trailing-edge debounce: rapid calls collapse into one invocation after
// the window closes.

export interface Debounced<A extends unknown[]> {
  (...args: A): void;
  cancel(): void;
  flush(): void;
}

export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  waitMs: number,
): Debounced<A> {
  let timer: ReturnType<typeof setTimeout> | null = null;
  let pending: A | null = null;

  const run = (...args: A) => {
    pending = args;
    if (timer !== null) clearTimeout(timer);
    timer = setTimeout(() => {
      timer = null;
      const call = pending;
      pending = null;
      if (call) fn(...call);
    }, waitMs);
  };
  run.cancel = () => {
    if (timer !== null) clearTimeout(timer);
    timer = null;
    pending = null;
  };
  run.flush = () => {
    if (timer !== null) {
      clearTimeout(timer);
      timer = null;
      const call = pending;
      pending = null;
      if (call) fn(...call);
    }
  };
  return run;
}
