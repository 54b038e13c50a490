def f(nums, target):
    pos = -1
    for i in range(len(nums)):
        if nums[i] == target:
            pos = i
            break
    return pos
# oracle-call: f([3, 1, 4], 1)
# oracle-call: f([3, 1, 4], 9)
