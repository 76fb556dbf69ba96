// Minimal typings for the node built-ins used by the headless tests
// (keeps the build free of a node types dependency).

declare module 'node:test' {
  type TestFn = (t?: unknown) => void | Promise<void>
  function test(name: string, fn: TestFn): void
  export default test
}

declare module 'node:assert/strict' {
  interface Assert {
    (value: unknown, message?: string): asserts value
    equal(actual: unknown, expected: unknown, message?: string): void
    notEqual(actual: unknown, expected: unknown, message?: string): void
    deepEqual(actual: unknown, expected: unknown, message?: string): void
    ok(value: unknown, message?: string): asserts value
    rejects(block: Promise<unknown> | (() => Promise<unknown>), message?: unknown): Promise<void>
    throws(block: () => unknown, message?: unknown): void
  }
  const assert: Assert
  export default assert
}
